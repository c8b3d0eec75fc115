//! Embedding tables, score prediction, and the objective terms: point-wise
//! MF loss, pair-wise BPR loss, the two scalar-strength social regularizers,
//! and the dimension-weighted (characterized) regularizers.

use crate::data::{Dataset, ShareTriplet, SocialStrengths};
use crate::error::{Error, Result};

/// User matrix P (K x M) and item matrix Q (K x N), stored column-major so
/// each user/item vector is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub k: usize,
    pub num_users: usize,
    pub num_items: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(num_users: usize, num_items: usize, k: usize) -> Self {
        Self {
            k,
            num_users,
            num_items,
            p: vec![0.0; k * num_users],
            q: vec![0.0; k * num_items],
        }
    }

    pub fn user_vec(&self, u: u32) -> &[f64] {
        let start = u as usize * self.k;
        &self.p[start..start + self.k]
    }

    pub fn item_vec(&self, i: u32) -> &[f64] {
        let start = i as usize * self.k;
        &self.q[start..start + self.k]
    }

    pub fn user_vec_mut(&mut self, u: u32) -> &mut [f64] {
        let start = u as usize * self.k;
        &mut self.p[start..start + self.k]
    }

    pub fn item_vec_mut(&mut self, i: u32) -> &mut [f64] {
        let start = i as usize * self.k;
        &mut self.q[start..start + self.k]
    }

    pub fn check_bounds(&self, u: u32, i: u32) -> Result<()> {
        if u as usize >= self.num_users {
            return Err(Error::IndexOutOfRange {
                kind: "user",
                index: u as usize,
                bound: self.num_users,
            });
        }
        if i as usize >= self.num_items {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: i as usize,
                bound: self.num_items,
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Predicted score: inner product of the user and item vectors.
pub fn predict(emb: &EmbeddingTable, u: u32, i: u32) -> Result<f64> {
    emb.check_bounds(u, i)?;
    Ok(dot(emb.user_vec(u), emb.item_vec(i)))
}

/// Which social term is active, and how it is weighted.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RegularizerKind {
    #[default]
    None,
    /// Distance to the strength-weighted sum of friends' vectors.
    WeightedSum,
    /// Sum of strength-weighted distances to each friend.
    SumWeightedDistance,
    /// Dimension-weighted distance with explicit per-pair weight vectors.
    CsrGeneral {
        pairs: Vec<WeightedPair>,
    },
    /// Dimension-weighted distance with the shared item's embedding as the
    /// weight vector, per product-sharing triplet.
    CsrProductSharing,
}

/// A directed user pair with an explicit K-dimensional weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPair {
    pub user: u32,
    pub friend: u32,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub lambda_s: f64,
    pub symmetrize: bool,
    /// Ablation switch: when set, the product-sharing term contributes no
    /// gradient to item vectors.
    pub freeze_q: bool,
}

impl RegularizerSpec {
    pub fn none() -> Self {
        Self {
            kind: RegularizerKind::None,
            lambda_s: 0.0,
            symmetrize: true,
            freeze_q: false,
        }
    }

    pub fn new(kind: RegularizerKind, lambda_s: f64) -> Self {
        Self {
            kind,
            lambda_s,
            symmetrize: true,
            freeze_q: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LossManner {
    Pointwise,
    Pairwise,
}

/// Squared-error loss over observed interactions plus L2 on both matrices.
pub fn pointwise_loss(emb: &EmbeddingTable, dataset: &Dataset, lambda_p: f64, lambda_q: f64) -> f64 {
    let fit: f64 = dataset
        .interactions()
        .iter()
        .map(|r| {
            let err = r.value - dot(emb.user_vec(r.user), emb.item_vec(r.item));
            err * err
        })
        .sum();
    fit + lambda_p * sq_norm(&emb.p) + lambda_q * sq_norm(&emb.q)
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// BPR loss for a single (user, positive, negative) triple, with L2 on the
/// three touched vectors.
pub fn bpr_loss(
    emb: &EmbeddingTable,
    u: u32,
    i: u32,
    j: u32,
    lambda_p: f64,
    lambda_q: f64,
) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidPair { item: i });
    }
    emb.check_bounds(u, i)?;
    emb.check_bounds(u, j)?;
    let margin = dot(emb.user_vec(u), emb.item_vec(i)) - dot(emb.user_vec(u), emb.item_vec(j));
    // -ln sigma(x) written as ln(1 + e^(-x)) via ln_1p for stability
    let rank_term = (-margin).exp().ln_1p();
    Ok(rank_term
        + lambda_p * sq_norm(emb.user_vec(u))
        + lambda_q * (sq_norm(emb.item_vec(i)) + sq_norm(emb.item_vec(j))))
}

/// Distance-to-weighted-sum-of-friends term. Users without friends
/// contribute zero.
pub fn social_reg_weighted_sum(emb: &EmbeddingTable, strengths: &SocialStrengths) -> f64 {
    let adjacency = strengths.adjacency(emb.num_users);
    let mut total = 0.0;
    let mut combined = vec![0.0f64; emb.k];
    for u in 0..emb.num_users as u32 {
        let friends = &adjacency[u as usize];
        if friends.is_empty() {
            continue;
        }
        combined.iter_mut().for_each(|v| *v = 0.0);
        for &(v, s) in friends {
            for (acc, &x) in combined.iter_mut().zip(emb.user_vec(v)) {
                *acc += s * x;
            }
        }
        total += emb
            .user_vec(u)
            .iter()
            .zip(&combined)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    total
}

/// Sum-of-weighted-distance term, summed over ordered friend pairs (each
/// unordered pair contributes from both sides).
pub fn social_reg_sum_weighted_distance(emb: &EmbeddingTable, strengths: &SocialStrengths) -> f64 {
    let adjacency = strengths.adjacency(emb.num_users);
    let mut total = 0.0;
    for u in 0..emb.num_users as u32 {
        for &(v, s) in &adjacency[u as usize] {
            let dist: f64 = emb
                .user_vec(u)
                .iter()
                .zip(emb.user_vec(v))
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            total += s * dist;
        }
    }
    total
}

/// Dimension-weighted distance with explicit weight vectors.
pub fn csr_reg_general(emb: &EmbeddingTable, pairs: &[WeightedPair]) -> Result<f64> {
    let mut total = 0.0;
    for pair in pairs {
        if pair.weights.len() != emb.k {
            return Err(Error::DimensionMismatch {
                expected: emb.k,
                got: pair.weights.len(),
            });
        }
        let pu = emb.user_vec(pair.user);
        let pv = emb.user_vec(pair.friend);
        total += pu
            .iter()
            .zip(pv)
            .zip(&pair.weights)
            .map(|((&a, &b), &w)| {
                let d = (a - b) * w;
                d * d
            })
            .sum::<f64>();
    }
    Ok(total)
}

/// Product-sharing term: the shared item's current embedding weights the
/// per-dimension distance of the two friends' vectors.
pub fn csr_reg_product_sharing(emb: &EmbeddingTable, shares: &[ShareTriplet]) -> Result<f64> {
    let mut total = 0.0;
    for t in shares {
        emb.check_bounds(t.user, t.item)?;
        emb.check_bounds(t.friend, t.item)?;
        let pu = emb.user_vec(t.user);
        let pv = emb.user_vec(t.friend);
        let qi = emb.item_vec(t.item);
        total += pu
            .iter()
            .zip(pv)
            .zip(qi)
            .map(|((&a, &b), &w)| {
                let d = (a - b) * w;
                d * d
            })
            .sum::<f64>();
    }
    Ok(total)
}

/// Value of the active social term, before the lambda_s weight.
pub fn social_term(
    emb: &EmbeddingTable,
    dataset: &Dataset,
    strengths: &SocialStrengths,
    spec: &RegularizerSpec,
) -> Result<f64> {
    match &spec.kind {
        RegularizerKind::None => Ok(0.0),
        RegularizerKind::WeightedSum => Ok(social_reg_weighted_sum(emb, strengths)),
        RegularizerKind::SumWeightedDistance => {
            Ok(social_reg_sum_weighted_distance(emb, strengths))
        }
        RegularizerKind::CsrGeneral { pairs } => csr_reg_general(emb, pairs),
        RegularizerKind::CsrProductSharing => csr_reg_product_sharing(emb, dataset.shares()),
    }
}

/// Full-batch pair-wise loss: for every observed (u, i), every unobserved j,
/// normalized by the user's negative count so users with many unobserved
/// items do not dominate. L2 applied globally to both matrices.
pub fn pairwise_batch_loss(
    emb: &EmbeddingTable,
    dataset: &Dataset,
    lambda_p: f64,
    lambda_q: f64,
) -> f64 {
    let mut fit = 0.0;
    for u in 0..dataset.num_users() as u32 {
        let negatives: Vec<u32> = (0..dataset.num_items() as u32)
            .filter(|&j| !dataset.is_observed(u, j))
            .collect();
        if negatives.is_empty() {
            continue;
        }
        let scale = 1.0 / negatives.len() as f64;
        for &i in dataset.items_of(u) {
            let pos = dot(emb.user_vec(u), emb.item_vec(i));
            for &j in &negatives {
                let margin = pos - dot(emb.user_vec(u), emb.item_vec(j));
                fit += scale * (-margin).exp().ln_1p();
            }
        }
    }
    fit + lambda_p * sq_norm(&emb.p) + lambda_q * sq_norm(&emb.q)
}

/// Interaction loss plus lambda_s times the active social term.
pub fn total_objective(
    emb: &EmbeddingTable,
    dataset: &Dataset,
    strengths: &SocialStrengths,
    spec: &RegularizerSpec,
    manner: LossManner,
    lambda_p: f64,
    lambda_q: f64,
) -> Result<f64> {
    let interaction = match manner {
        LossManner::Pointwise => pointwise_loss(emb, dataset, lambda_p, lambda_q),
        LossManner::Pairwise => pairwise_batch_loss(emb, dataset, lambda_p, lambda_q),
    };
    Ok(interaction + spec.lambda_s * social_term(emb, dataset, strengths, spec)?)
}

#[cfg(test)]
mod tests;
