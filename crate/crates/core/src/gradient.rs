//! Hand-derived full-batch gradients of the total objective, and the
//! central-difference machinery used to validate them numerically.

use crate::data::{Dataset, SocialStrengths};
use crate::error::Result;
use crate::model::{
    dot, sigmoid, total_objective, EmbeddingTable, LossManner, RegularizerKind, RegularizerSpec,
};

/// Gradients laid out exactly like the embedding table.
#[derive(Debug, Clone)]
pub struct ObjectiveGradient {
    pub k: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl ObjectiveGradient {
    fn zeros(emb: &EmbeddingTable) -> Self {
        Self {
            k: emb.k,
            p: vec![0.0; emb.p.len()],
            q: vec![0.0; emb.q.len()],
        }
    }

    pub fn user_grad(&self, u: u32) -> &[f64] {
        let start = u as usize * self.k;
        &self.p[start..start + self.k]
    }

    pub fn item_grad(&self, i: u32) -> &[f64] {
        let start = i as usize * self.k;
        &self.q[start..start + self.k]
    }

    fn add_user(&mut self, u: u32, scale: f64, vec: &[f64]) {
        let start = u as usize * self.k;
        for (g, &v) in self.p[start..start + self.k].iter_mut().zip(vec) {
            *g += scale * v;
        }
    }

    fn add_item(&mut self, i: u32, scale: f64, vec: &[f64]) {
        let start = i as usize * self.k;
        for (g, &v) in self.q[start..start + self.k].iter_mut().zip(vec) {
            *g += scale * v;
        }
    }
}

/// Analytic gradient of `total_objective` with respect to every entry of P
/// and Q.
pub fn objective_gradient(
    emb: &EmbeddingTable,
    dataset: &Dataset,
    strengths: &SocialStrengths,
    spec: &RegularizerSpec,
    manner: LossManner,
    lambda_p: f64,
    lambda_q: f64,
) -> Result<ObjectiveGradient> {
    let mut grad = ObjectiveGradient::zeros(emb);

    match manner {
        LossManner::Pointwise => {
            for r in dataset.interactions() {
                let pu = emb.user_vec(r.user);
                let qi = emb.item_vec(r.item);
                let err = r.value - dot(pu, qi);
                grad.add_user(r.user, -2.0 * err, qi);
                grad.add_item(r.item, -2.0 * err, pu);
            }
        }
        LossManner::Pairwise => {
            for u in 0..dataset.num_users() as u32 {
                let negatives: Vec<u32> = (0..dataset.num_items() as u32)
                    .filter(|&j| !dataset.is_observed(u, j))
                    .collect();
                if negatives.is_empty() {
                    continue;
                }
                let scale = 1.0 / negatives.len() as f64;
                for &i in dataset.items_of(u) {
                    for &j in &negatives {
                        let pu = emb.user_vec(u);
                        let qi = emb.item_vec(i);
                        let qj = emb.item_vec(j);
                        let margin = dot(pu, qi) - dot(pu, qj);
                        // d(-ln sigma(x))/dx = -sigma(-x)
                        let coeff = -sigmoid(-margin) * scale;
                        let start = u as usize * emb.k;
                        for ((g, &a), &b) in grad.p[start..start + emb.k]
                            .iter_mut()
                            .zip(qi)
                            .zip(qj)
                        {
                            *g += coeff * (a - b);
                        }
                        grad.add_item(i, coeff, pu);
                        grad.add_item(j, -coeff, pu);
                    }
                }
            }
        }
    }

    // global L2
    for (g, &v) in grad.p.iter_mut().zip(&emb.p) {
        *g += 2.0 * lambda_p * v;
    }
    for (g, &v) in grad.q.iter_mut().zip(&emb.q) {
        *g += 2.0 * lambda_q * v;
    }

    add_social_gradient(&mut grad, emb, dataset, strengths, spec)?;
    Ok(grad)
}

fn add_social_gradient(
    grad: &mut ObjectiveGradient,
    emb: &EmbeddingTable,
    dataset: &Dataset,
    strengths: &SocialStrengths,
    spec: &RegularizerSpec,
) -> Result<()> {
    let lambda_s = spec.lambda_s;
    if lambda_s == 0.0 {
        return Ok(());
    }
    match &spec.kind {
        RegularizerKind::None => {}
        RegularizerKind::WeightedSum => {
            let adjacency = strengths.adjacency(emb.num_users);
            for u in 0..emb.num_users as u32 {
                let friends = &adjacency[u as usize];
                if friends.is_empty() {
                    continue;
                }
                let mut residual: Vec<f64> = emb.user_vec(u).to_vec();
                for &(v, s) in friends {
                    for (r, &x) in residual.iter_mut().zip(emb.user_vec(v)) {
                        *r -= s * x;
                    }
                }
                grad.add_user(u, 2.0 * lambda_s, &residual);
                for &(v, s) in friends {
                    grad.add_user(v, -2.0 * lambda_s * s, &residual);
                }
            }
        }
        RegularizerKind::SumWeightedDistance => {
            let adjacency = strengths.adjacency(emb.num_users);
            for u in 0..emb.num_users as u32 {
                for &(v, s) in &adjacency[u as usize] {
                    let delta: Vec<f64> = emb
                        .user_vec(u)
                        .iter()
                        .zip(emb.user_vec(v))
                        .map(|(&a, &b)| a - b)
                        .collect();
                    grad.add_user(u, 2.0 * lambda_s * s, &delta);
                    grad.add_user(v, -2.0 * lambda_s * s, &delta);
                }
            }
        }
        RegularizerKind::CsrGeneral { pairs } => {
            for pair in pairs {
                if pair.weights.len() != emb.k {
                    return Err(crate::error::Error::DimensionMismatch {
                        expected: emb.k,
                        got: pair.weights.len(),
                    });
                }
                let weighted: Vec<f64> = emb
                    .user_vec(pair.user)
                    .iter()
                    .zip(emb.user_vec(pair.friend))
                    .zip(&pair.weights)
                    .map(|((&a, &b), &w)| (a - b) * w * w)
                    .collect();
                grad.add_user(pair.user, 2.0 * lambda_s, &weighted);
                grad.add_user(pair.friend, -2.0 * lambda_s, &weighted);
            }
        }
        RegularizerKind::CsrProductSharing => {
            for t in dataset.shares() {
                let pu = emb.user_vec(t.user);
                let pv = emb.user_vec(t.friend);
                let qi = emb.item_vec(t.item);
                let weighted: Vec<f64> = pu
                    .iter()
                    .zip(pv)
                    .zip(qi)
                    .map(|((&a, &b), &w)| (a - b) * w * w)
                    .collect();
                grad.add_user(t.user, 2.0 * lambda_s, &weighted);
                grad.add_user(t.friend, -2.0 * lambda_s, &weighted);
                if !spec.freeze_q {
                    let squared: Vec<f64> = pu
                        .iter()
                        .zip(pv)
                        .zip(qi)
                        .map(|((&a, &b), &w)| (a - b) * (a - b) * w)
                        .collect();
                    grad.add_item(t.item, 2.0 * lambda_s, &squared);
                }
            }
        }
    }
    Ok(())
}

/// Which matrix a flat coordinate addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    P(usize),
    Q(usize),
}

/// Central difference (f(x+h) - f(x-h)) / 2h of a scalar function.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central difference of an objective over a single embedding coordinate.
/// The table is restored to its original state before returning.
pub fn finite_diff_gradient(
    mut objective: impl FnMut(&EmbeddingTable) -> f64,
    emb: &mut EmbeddingTable,
    coord: Coordinate,
    h: f64,
) -> f64 {
    fn set(emb: &mut EmbeddingTable, coord: Coordinate, value: f64) {
        match coord {
            Coordinate::P(i) => emb.p[i] = value,
            Coordinate::Q(i) => emb.q[i] = value,
        }
    }
    let original = match coord {
        Coordinate::P(i) => emb.p[i],
        Coordinate::Q(i) => emb.q[i],
    };
    set(emb, coord, original + h);
    let plus = objective(emb);
    set(emb, coord, original - h);
    let minus = objective(emb);
    set(emb, coord, original);
    (plus - minus) / (2.0 * h)
}

/// Numeric-vs-analytic comparison used by the gradient suite.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1.0);
    (analytic - numeric).abs() / denom
}

/// Checks the analytic gradient of `total_objective` against central
/// differences on the given coordinates; returns the worst relative error.
#[allow(clippy::too_many_arguments)]
pub fn check_gradient(
    emb: &mut EmbeddingTable,
    dataset: &Dataset,
    strengths: &SocialStrengths,
    spec: &RegularizerSpec,
    manner: LossManner,
    lambda_p: f64,
    lambda_q: f64,
    coords: &[Coordinate],
    h: f64,
) -> Result<f64> {
    let analytic = objective_gradient(emb, dataset, strengths, spec, manner, lambda_p, lambda_q)?;
    let mut worst = 0.0f64;
    for &coord in coords {
        let numeric = finite_diff_gradient(
            |e| {
                total_objective(e, dataset, strengths, spec, manner, lambda_p, lambda_q)
                    .expect("objective evaluates")
            },
            emb,
            coord,
            h,
        );
        let a = match coord {
            Coordinate::P(i) => analytic.p[i],
            Coordinate::Q(i) => analytic.q[i],
        };
        worst = worst.max(relative_error(a, numeric));
    }
    Ok(worst)
}
