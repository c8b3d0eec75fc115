//! SGD training of any (interaction loss, social regularizer) combination,
//! with interleaved interaction and social-step streams.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::data::{derive_seed, Dataset, SocialStrengths};
use crate::error::{Error, Result};
use crate::model::{
    dot, sigmoid, social_term, EmbeddingTable, LossManner, RegularizerKind, RegularizerSpec,
    WeightedPair,
};

const SEED_LABEL_INIT: u64 = 1;
const SEED_LABEL_INTERACTION: u64 = 2;
const SEED_LABEL_SOCIAL: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub manner: LossManner,
    pub alpha: f64,
    pub k: usize,
    pub lambda_p: f64,
    pub lambda_q: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            manner: LossManner::Pairwise,
            alpha: 0.01,
            k: 16,
            lambda_p: 0.01,
            lambda_q: 0.01,
            epochs: 200,
            negatives_per_positive: 1,
            seed: 42,
            init_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be finite and >= 0".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.lambda_p < 0.0 || self.lambda_q < 0.0 {
            return Err(Error::InvalidConfig("lambda_p/lambda_q must be >= 0".into()));
        }
        if self.init_scale < 0.0 {
            return Err(Error::InvalidConfig("init_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Gaussian init, mean 0, std `init_scale`, deterministic per seed.
pub fn init_embeddings(
    num_users: usize,
    num_items: usize,
    k: usize,
    seed: u64,
    init_scale: f64,
) -> EmbeddingTable {
    let mut emb = EmbeddingTable::zeros(num_users, num_items, k);
    if init_scale == 0.0 {
        return emb;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SEED_LABEL_INIT));
    let dist = Normal::new(0.0, init_scale).expect("positive std");
    for v in emb.p.iter_mut().chain(emb.q.iter_mut()) {
        *v = dist.sample(&mut rng);
    }
    emb
}

/// Uniform draw from the items the user has not interacted with.
pub fn sample_negative(dataset: &Dataset, u: u32, rng: &mut impl Rng) -> Result<u32> {
    let n = dataset.num_items();
    if dataset.items_of(u).len() >= n {
        return Err(Error::NoNegative { user: u });
    }
    loop {
        let j = rng.random_range(0..n as u32);
        if !dataset.is_observed(u, j) {
            return Ok(j);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-step interaction loss over the epoch's stochastic steps.
    pub interaction_loss: f64,
    /// Exact social term value at the end of the epoch (before lambda_s).
    pub social_term: f64,
    pub total: f64,
    /// Root of the summed squared norms of applied gradients.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub embeddings: EmbeddingTable,
    pub log: Vec<EpochStats>,
}

#[derive(Debug, Clone, Copy)]
enum SocialStep {
    /// Per-user weighted-sum residual step.
    User(u32),
    /// Directed pair index into the pair list.
    Pair(usize),
    /// Triplet index into the share log.
    Triplet(usize),
}

/// Directed friend pairs in adjacency order, the shared enumeration used by
/// both scalar-strength social streams and their all-ones CSR counterpart.
pub fn directed_pairs(strengths: &SocialStrengths, num_users: usize) -> Vec<(u32, u32, f64)> {
    let adjacency = strengths.adjacency(num_users);
    let mut out = Vec::new();
    for (u, friends) in adjacency.iter().enumerate() {
        for &(v, s) in friends {
            out.push((u as u32, v, s));
        }
    }
    out
}

/// All-ones weight vectors over the same directed pair enumeration; training
/// under these matches the sum-of-weighted-distance stream step for step.
pub fn unit_weight_pairs(strengths: &SocialStrengths, num_users: usize, k: usize) -> Vec<WeightedPair> {
    directed_pairs(strengths, num_users)
        .into_iter()
        .map(|(u, v, _)| WeightedPair {
            user: u,
            friend: v,
            weights: vec![1.0; k],
        })
        .collect()
}

pub struct Trainer<'a> {
    dataset: &'a Dataset,
    strengths: &'a SocialStrengths,
    spec: &'a RegularizerSpec,
    config: &'a TrainConfig,
    rng_interaction: ChaCha8Rng,
    rng_social: ChaCha8Rng,
    pair_stream: Vec<(u32, u32, f64)>,
    user_stream: Vec<u32>,
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        dataset: &'a Dataset,
        strengths: &'a SocialStrengths,
        spec: &'a RegularizerSpec,
        config: &'a TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        let pair_stream = match &spec.kind {
            RegularizerKind::SumWeightedDistance => {
                directed_pairs(strengths, dataset.num_users())
            }
            _ => Vec::new(),
        };
        let adjacency = match &spec.kind {
            RegularizerKind::WeightedSum => strengths.adjacency(dataset.num_users()),
            _ => Vec::new(),
        };
        let user_stream = match &spec.kind {
            RegularizerKind::WeightedSum => (0..dataset.num_users() as u32)
                .filter(|&u| !adjacency[u as usize].is_empty())
                .collect(),
            _ => Vec::new(),
        };
        Ok(Self {
            dataset,
            strengths,
            spec,
            config,
            rng_interaction: ChaCha8Rng::seed_from_u64(derive_seed(
                config.seed,
                SEED_LABEL_INTERACTION,
            )),
            rng_social: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SEED_LABEL_SOCIAL)),
            pair_stream,
            user_stream,
            adjacency,
        })
    }

    fn social_active(&self) -> bool {
        self.spec.lambda_s > 0.0 && self.spec.kind != RegularizerKind::None
    }

    fn social_steps(&mut self) -> Vec<SocialStep> {
        if !self.social_active() {
            return Vec::new();
        }
        let mut steps: Vec<SocialStep> = match &self.spec.kind {
            RegularizerKind::None => Vec::new(),
            RegularizerKind::WeightedSum => {
                self.user_stream.iter().map(|&u| SocialStep::User(u)).collect()
            }
            RegularizerKind::SumWeightedDistance => {
                (0..self.pair_stream.len()).map(SocialStep::Pair).collect()
            }
            RegularizerKind::CsrGeneral { pairs } => {
                (0..pairs.len()).map(SocialStep::Pair).collect()
            }
            RegularizerKind::CsrProductSharing => (0..self.dataset.shares().len())
                .map(SocialStep::Triplet)
                .collect(),
        };
        steps.shuffle(&mut self.rng_social);
        steps
    }

    /// One pass over the interleaved interaction and social streams.
    pub fn epoch(&mut self, emb: &mut EmbeddingTable, epoch: usize) -> Result<EpochStats> {
        let mut interaction_order: Vec<usize> = (0..self.dataset.interactions().len()).collect();
        interaction_order.shuffle(&mut self.rng_interaction);
        let social_order = self.social_steps();

        let mut interaction_loss_sum = 0.0;
        let mut interaction_steps = 0usize;
        let mut grad_sq_sum = 0.0;
        let mut step_index = 0usize;

        let total_a = interaction_order.len();
        let total_b = social_order.len();
        let (mut ia, mut ib) = (0usize, 0usize);
        while ia < total_a || ib < total_b {
            let take_interaction =
                ib >= total_b || (ia < total_a && ia * total_b <= ib * total_a);
            let step_gsq;
            if take_interaction {
                let rec = self.dataset.interactions()[interaction_order[ia]];
                ia += 1;
                let (loss, gsq) = match self.config.manner {
                    LossManner::Pointwise => self.pointwise_step(emb, rec.user, rec.item, rec.value),
                    LossManner::Pairwise => {
                        let mut loss = 0.0;
                        let mut gsq = 0.0;
                        for _ in 0..self.config.negatives_per_positive.max(1) {
                            let j =
                                sample_negative(self.dataset, rec.user, &mut self.rng_interaction)?;
                            let (l, g) = self.bpr_step(emb, rec.user, rec.item, j);
                            loss += l;
                            gsq += g;
                        }
                        (loss, gsq)
                    }
                };
                interaction_loss_sum += loss;
                interaction_steps += 1;
                grad_sq_sum += gsq;
                step_gsq = gsq;
            } else {
                let step = social_order[ib];
                ib += 1;
                step_gsq = self.social_step(emb, step);
                grad_sq_sum += step_gsq;
            }
            // A non-finite gradient means the update just wrote garbage.
            if !step_gsq.is_finite() {
                return Err(Error::Diverged { epoch, step: step_index });
            }
            step_index += 1;
        }

        let social = social_term(emb, self.dataset, self.strengths, self.spec)?;
        let interaction_loss = if interaction_steps > 0 {
            interaction_loss_sum / interaction_steps as f64
        } else {
            0.0
        };
        let stats = EpochStats {
            epoch,
            interaction_loss,
            social_term: social,
            total: interaction_loss + self.spec.lambda_s * social,
            grad_norm: grad_sq_sum.sqrt(),
        };
        if !emb.is_finite() {
            return Err(Error::Diverged { epoch, step: step_index });
        }
        Ok(stats)
    }

    fn pointwise_step(&self, emb: &mut EmbeddingTable, u: u32, i: u32, y: f64) -> (f64, f64) {
        let alpha = self.config.alpha;
        let (lp, lq) = (self.config.lambda_p, self.config.lambda_q);
        let err = y - dot(emb.user_vec(u), emb.item_vec(i));
        let k = emb.k;
        let mut gsq = 0.0;
        let qi: Vec<f64> = emb.item_vec(i).to_vec();
        {
            let pu = emb.user_vec_mut(u);
            for d in 0..k {
                let g = -2.0 * err * qi[d] + 2.0 * lp * pu[d];
                gsq += g * g;
                pu[d] -= alpha * g;
            }
        }
        let pu_new: Vec<f64> = emb.user_vec(u).to_vec();
        {
            let qi_mut = emb.item_vec_mut(i);
            for d in 0..k {
                let g = -2.0 * err * pu_new[d] + 2.0 * lq * qi_mut[d];
                gsq += g * g;
                qi_mut[d] -= alpha * g;
            }
        }
        (err * err, gsq)
    }

    fn bpr_step(&self, emb: &mut EmbeddingTable, u: u32, i: u32, j: u32) -> (f64, f64) {
        let alpha = self.config.alpha;
        let (lp, lq) = (self.config.lambda_p, self.config.lambda_q);
        let k = emb.k;
        let margin = dot(emb.user_vec(u), emb.item_vec(i)) - dot(emb.user_vec(u), emb.item_vec(j));
        let coeff = -sigmoid(-margin);
        let loss = (-margin).exp().ln_1p();

        let pu: Vec<f64> = emb.user_vec(u).to_vec();
        let qi: Vec<f64> = emb.item_vec(i).to_vec();
        let qj: Vec<f64> = emb.item_vec(j).to_vec();
        let mut gsq = 0.0;
        {
            let pu_mut = emb.user_vec_mut(u);
            for d in 0..k {
                let g = coeff * (qi[d] - qj[d]) + 2.0 * lp * pu[d];
                gsq += g * g;
                pu_mut[d] -= alpha * g;
            }
        }
        {
            let qi_mut = emb.item_vec_mut(i);
            for d in 0..k {
                let g = coeff * pu[d] + 2.0 * lq * qi[d];
                gsq += g * g;
                qi_mut[d] -= alpha * g;
            }
        }
        {
            let qj_mut = emb.item_vec_mut(j);
            for d in 0..k {
                let g = -coeff * pu[d] + 2.0 * lq * qj[d];
                gsq += g * g;
                qj_mut[d] -= alpha * g;
            }
        }
        (loss, gsq)
    }

    fn social_step(&self, emb: &mut EmbeddingTable, step: SocialStep) -> f64 {
        let alpha = self.config.alpha;
        let factor = 2.0 * self.spec.lambda_s;
        let k = emb.k;
        let mut gsq = 0.0;
        match (step, &self.spec.kind) {
            (SocialStep::User(u), RegularizerKind::WeightedSum) => {
                let friends = &self.adjacency[u as usize];
                let mut residual: Vec<f64> = emb.user_vec(u).to_vec();
                for &(v, s) in friends {
                    for (r, &x) in residual.iter_mut().zip(emb.user_vec(v)) {
                        *r -= s * x;
                    }
                }
                {
                    let pu = emb.user_vec_mut(u);
                    for d in 0..k {
                        let g = factor * residual[d];
                        gsq += g * g;
                        pu[d] -= alpha * g;
                    }
                }
                for &(v, s) in friends {
                    let pv = emb.user_vec_mut(v);
                    for d in 0..k {
                        let g = -factor * s * residual[d];
                        gsq += g * g;
                        pv[d] -= alpha * g;
                    }
                }
            }
            (SocialStep::Pair(idx), RegularizerKind::SumWeightedDistance) => {
                let (u, v, s) = self.pair_stream[idx];
                let grads: Vec<f64> = emb
                    .user_vec(u)
                    .iter()
                    .zip(emb.user_vec(v))
                    .map(|(&a, &b)| factor * s * (a - b))
                    .collect();
                gsq += self.apply_pair_update(emb, u, v, &grads);
            }
            (SocialStep::Pair(idx), RegularizerKind::CsrGeneral { pairs }) => {
                let pair = &pairs[idx];
                let grads: Vec<f64> = emb
                    .user_vec(pair.user)
                    .iter()
                    .zip(emb.user_vec(pair.friend))
                    .zip(&pair.weights)
                    .map(|((&a, &b), &w)| factor * (a - b) * w * w)
                    .collect();
                gsq += self.apply_pair_update(emb, pair.user, pair.friend, &grads);
            }
            (SocialStep::Triplet(idx), RegularizerKind::CsrProductSharing) => {
                let t = self.dataset.shares()[idx];
                let delta: Vec<f64> = emb
                    .user_vec(t.user)
                    .iter()
                    .zip(emb.user_vec(t.friend))
                    .map(|(&a, &b)| a - b)
                    .collect();
                let qi: Vec<f64> = emb.item_vec(t.item).to_vec();
                {
                    let pu = emb.user_vec_mut(t.user);
                    for d in 0..k {
                        let g = factor * delta[d] * qi[d] * qi[d];
                        gsq += g * g;
                        pu[d] -= alpha * g;
                    }
                }
                {
                    let pv = emb.user_vec_mut(t.friend);
                    for d in 0..k {
                        let g = -(factor * delta[d] * qi[d] * qi[d]);
                        gsq += g * g;
                        pv[d] -= alpha * g;
                    }
                }
                if !self.spec.freeze_q {
                    let qi_mut = emb.item_vec_mut(t.item);
                    for d in 0..k {
                        let g = factor * delta[d] * delta[d] * qi[d];
                        gsq += g * g;
                        qi_mut[d] -= alpha * g;
                    }
                }
            }
            _ => unreachable!("step kind matches active regularizer"),
        }
        gsq
    }

    fn apply_pair_update(&self, emb: &mut EmbeddingTable, u: u32, v: u32, grads: &[f64]) -> f64 {
        let alpha = self.config.alpha;
        let k = emb.k;
        let mut gsq = 0.0;
        {
            let pu = emb.user_vec_mut(u);
            for d in 0..k {
                gsq += grads[d] * grads[d];
                pu[d] -= alpha * grads[d];
            }
        }
        {
            let pv = emb.user_vec_mut(v);
            for d in 0..k {
                gsq += grads[d] * grads[d];
                pv[d] -= alpha * (-grads[d]);
            }
        }
        gsq
    }
}

/// Runs `epochs` passes of SGD and returns the final table plus the per-epoch
/// log. `epochs = 0` returns the initial embeddings untouched.
pub fn train(
    dataset: &Dataset,
    strengths: &SocialStrengths,
    spec: &RegularizerSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut emb = init_embeddings(
        dataset.num_users(),
        dataset.num_items(),
        config.k,
        config.seed,
        config.init_scale,
    );
    let mut trainer = Trainer::new(dataset, strengths, spec, config)?;
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let stats = trainer.epoch(&mut emb, epoch)?;
        log.push(stats);
    }
    Ok(TrainOutcome {
        embeddings: emb,
        log,
    })
}

/// Writes the per-epoch log as CSV: epoch, interaction_loss, social_term,
/// total, grad_norm.
pub fn write_training_log(log: &[EpochStats], path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    writeln!(file, "epoch,interaction_loss,social_term,total,grad_norm").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    for s in log {
        writeln!(
            file,
            "{},{},{},{},{}",
            s.epoch, s.interaction_loss, s.social_term, s.total, s.grad_norm
        )
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    Ok(())
}
