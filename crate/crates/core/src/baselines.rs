//! Non-MF baselines (Rand, ItemPop) and the simplified SBPR trainer. BPR,
//! SocialBPR and UGPMF are plain training-module configurations; see
//! `baseline_regularizer`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{derive_seed, Dataset};
use crate::error::{Error, Result};
use crate::model::{bpr_loss, dot, sigmoid, EmbeddingTable, LossManner, RegularizerKind};
use crate::train::{init_embeddings, sample_negative, EpochStats, TrainConfig, TrainOutcome};

const SEED_LABEL_INTERACTION: u64 = 2; // same stream label as the trainer
const SEED_LABEL_RANDOM_RANK: u64 = 7;

/// Maps a paper baseline name to its (manner, regularizer) configuration.
/// Returns None for models that are not training-module configurations.
pub fn baseline_regularizer(name: &str) -> Option<(LossManner, RegularizerKind)> {
    match name {
        "bpr" => Some((LossManner::Pairwise, RegularizerKind::None)),
        "socialbpr" => Some((LossManner::Pairwise, RegularizerKind::WeightedSum)),
        "ugpmf" => Some((LossManner::Pairwise, RegularizerKind::SumWeightedDistance)),
        "csr" => Some((LossManner::Pairwise, RegularizerKind::CsrProductSharing)),
        _ => None,
    }
}

/// Per-item interaction counts from the training split.
#[derive(Debug, Clone)]
pub struct PopularityModel {
    counts: Vec<u64>,
}

impl PopularityModel {
    pub fn from_train(train: &Dataset) -> Self {
        let mut counts = vec![0u64; train.num_items()];
        for r in train.interactions() {
            counts[r.item as usize] += 1;
        }
        Self { counts }
    }

    pub fn count(&self, item: u32) -> u64 {
        self.counts[item as usize]
    }

    /// Score usable with the shared evaluation path; ties on count are
    /// resolved there by ascending item index.
    pub fn score(&self, item: u32) -> f64 {
        self.counts[item as usize] as f64
    }
}

/// Seeded uniform permutation of the candidates.
pub fn rank_random(user: u32, candidates: &[u32], seed: u64) -> Vec<u32> {
    let mut out = candidates.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        SEED_LABEL_RANDOM_RANK ^ ((user as u64) << 8),
    ));
    out.shuffle(&mut rng);
    out
}

/// Deterministic score for the random baseline so it can flow through the
/// common evaluate path: an item's score is its position draw for this user.
pub fn random_scorer(user: u32, item: u32, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        SEED_LABEL_RANDOM_RANK ^ ((user as u64) << 24) ^ item as u64,
    ));
    rng.random::<f64>()
}

/// Descending popularity, ties by ascending item index.
pub fn rank_itempop(model: &PopularityModel, candidates: &[u32]) -> Vec<u32> {
    let mut out = candidates.to_vec();
    out.sort_by(|&a, &b| {
        model
            .count(b)
            .cmp(&model.count(a))
            .then(a.cmp(&b))
    });
    out
}

/// One SBPR update. `social` carries the friend-consumed item and its social
/// coefficient (1 + number of friends who interacted with it); when absent
/// the step degenerates to a plain BPR update on (positive, negative).
pub fn sbpr_step(
    emb: &mut EmbeddingTable,
    u: u32,
    i_pos: u32,
    social: Option<(u32, u64)>,
    j_neg: u32,
    alpha: f64,
    lambda_p: f64,
    lambda_q: f64,
) -> Result<()> {
    emb.check_bounds(u, i_pos)?;
    emb.check_bounds(u, j_neg)?;
    match social {
        None => {
            bpr_update(emb, u, i_pos, j_neg, 1.0, alpha, lambda_p, lambda_q);
        }
        Some((i_social, coeff)) => {
            emb.check_bounds(u, i_social)?;
            // positive over social, gap shrunk by the social coefficient
            bpr_update(
                emb,
                u,
                i_pos,
                i_social,
                1.0 / (1.0 + coeff as f64),
                alpha,
                lambda_p,
                lambda_q,
            );
            // social over negative
            bpr_update(emb, u, i_social, j_neg, 1.0, alpha, lambda_p, lambda_q);
        }
    }
    Ok(())
}

/// BPR update on -ln sigma(scale * (x_ui - x_uj)) plus local L2.
fn bpr_update(
    emb: &mut EmbeddingTable,
    u: u32,
    i: u32,
    j: u32,
    scale: f64,
    alpha: f64,
    lambda_p: f64,
    lambda_q: f64,
) {
    let k = emb.k;
    let margin = scale * (dot(emb.user_vec(u), emb.item_vec(i)) - dot(emb.user_vec(u), emb.item_vec(j)));
    let coeff = -sigmoid(-margin) * scale;

    let pu: Vec<f64> = emb.user_vec(u).to_vec();
    let qi: Vec<f64> = emb.item_vec(i).to_vec();
    let qj: Vec<f64> = emb.item_vec(j).to_vec();
    {
        let pu_mut = emb.user_vec_mut(u);
        for d in 0..k {
            pu_mut[d] -= alpha * (coeff * (qi[d] - qj[d]) + 2.0 * lambda_p * pu[d]);
        }
    }
    {
        let qi_mut = emb.item_vec_mut(i);
        for d in 0..k {
            qi_mut[d] -= alpha * (coeff * pu[d] + 2.0 * lambda_q * qi[d]);
        }
    }
    {
        let qj_mut = emb.item_vec_mut(j);
        for d in 0..k {
            qj_mut[d] -= alpha * (-coeff * pu[d] + 2.0 * lambda_q * qj[d]);
        }
    }
}

/// Per-user social item pools: items consumed by a friend (via the share
/// log's pairs) but not by the user, with the friend-count coefficient.
pub fn social_item_pools(train: &Dataset) -> Vec<Vec<(u32, u64)>> {
    let num_users = train.num_users();
    let mut friends: Vec<Vec<u32>> = vec![Vec::new(); num_users];
    for t in train.shares() {
        let (u, v) = (t.user as usize, t.friend as usize);
        if !friends[u].contains(&t.friend) {
            friends[u].push(t.friend);
        }
        if !friends[v].contains(&t.user) {
            friends[v].push(t.user);
        }
    }
    let mut pools = Vec::with_capacity(num_users);
    for u in 0..num_users as u32 {
        let mut pool: Vec<(u32, u64)> = Vec::new();
        for &f in &friends[u as usize] {
            for &item in train.items_of(f) {
                if train.is_observed(u, item) {
                    continue;
                }
                match pool.iter_mut().find(|(i, _)| *i == item) {
                    Some((_, c)) => *c += 1,
                    None => pool.push((item, 1)),
                }
            }
        }
        pool.sort_by_key(|&(i, _)| i);
        pools.push(pool);
    }
    pools
}

/// SBPR training loop. With an empty share log every user's social pool is
/// empty and the trajectory is bit-identical to plain BPR under the same
/// seed: the per-positive negative draw is the only randomness consumed.
pub fn sbpr_train(train: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut emb = init_embeddings(
        train.num_users(),
        train.num_items(),
        config.k,
        config.seed,
        config.init_scale,
    );
    let pools = social_item_pools(train);
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SEED_LABEL_INTERACTION));
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.interactions().len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut loss_steps = 0usize;
        for (step, &idx) in order.iter().enumerate() {
            let rec = train.interactions()[idx];
            let pool = &pools[rec.user as usize];
            for _ in 0..config.negatives_per_positive.max(1) {
                let social = if pool.is_empty() {
                    None
                } else {
                    Some(pool[rng.random_range(0..pool.len())])
                };
                // negative must be unobserved and outside the social pool
                let j = loop {
                    let j = sample_negative(train, rec.user, &mut rng)?;
                    if social.is_some() && pool.iter().any(|&(i, _)| i == j) {
                        continue;
                    }
                    break j;
                };
                loss_sum += bpr_loss(&emb, rec.user, rec.item, j, 0.0, 0.0)?;
                loss_steps += 1;
                sbpr_step(
                    &mut emb,
                    rec.user,
                    rec.item,
                    social,
                    j,
                    config.alpha,
                    config.lambda_p,
                    config.lambda_q,
                )?;
            }
            if step % 128 == 0 && !emb.is_finite() {
                return Err(Error::Diverged { epoch, step });
            }
        }
        if !emb.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step: order.len(),
            });
        }
        let interaction_loss = loss_sum / loss_steps.max(1) as f64;
        log.push(EpochStats {
            epoch,
            interaction_loss,
            social_term: 0.0,
            total: interaction_loss,
            grad_norm: 0.0,
        });
    }
    Ok(TrainOutcome {
        embeddings: emb,
        log,
    })
}
