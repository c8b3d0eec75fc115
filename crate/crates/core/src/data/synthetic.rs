//! Seeded synthetic corpora with per-dimension friend influence.
//!
//! Ground truth: every item has a dominant feature dimension; every friend
//! pair agrees on one specific dimension of the preference space and shares
//! items dominated by that dimension. Interactions are the top-scoring items
//! per user under noisy inner products.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{derive_seed, Dataset, Interaction, ShareTriplet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub k_true: usize,
    pub interactions_per_user: usize,
    pub shares_per_user: usize,
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 300,
            items: 500,
            k_true: 8,
            interactions_per_user: 5,
            shares_per_user: 10,
            noise: 0.3,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_true == 0 {
            return Err(Error::InvalidSpec("k_true must be >= 1".into()));
        }
        if self.users < 2 {
            return Err(Error::InvalidSpec("need at least 2 users".into()));
        }
        if self.items == 0 {
            return Err(Error::InvalidSpec("need at least 1 item".into()));
        }
        if self.interactions_per_user > self.items {
            return Err(Error::InvalidSpec(
                "interactions_per_user exceeds item count".into(),
            ));
        }
        if self.noise < 0.0 {
            return Err(Error::InvalidSpec("noise must be nonnegative".into()));
        }
        Ok(())
    }

    /// Parses a key=value spec file (keys: users, items, k_true,
    /// interactions_per_user, shares_per_user, noise). Lines starting with
    /// `#` and blank lines are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut spec = SyntheticSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            let parse_usize = |v: &str| {
                v.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("bad value '{v}': {e}"),
                })
            };
            match key.trim() {
                "users" => spec.users = parse_usize(value)?,
                "items" => spec.items = parse_usize(value)?,
                "k_true" => spec.k_true = parse_usize(value)?,
                "interactions_per_user" => spec.interactions_per_user = parse_usize(value)?,
                "shares_per_user" => spec.shares_per_user = parse_usize(value)?,
                "noise" => {
                    spec.noise = value.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        msg: format!("bad value '{value}': {e}"),
                    })?
                }
                other => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "users={}", self.users);
        let _ = writeln!(out, "items={}", self.items);
        let _ = writeln!(out, "k_true={}", self.k_true);
        let _ = writeln!(out, "interactions_per_user={}", self.interactions_per_user);
        let _ = writeln!(out, "shares_per_user={}", self.shares_per_user);
        let _ = writeln!(out, "noise={}", self.noise);
        out
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let k = spec.k_true;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x53594e)); // "SYN"

    // Item factors: one dominant dimension per item plus low background.
    let mut item_factors = vec![vec![0.0f64; k]; spec.items];
    let mut dominant_dim = vec![0usize; spec.items];
    let mut items_by_dim: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (i, factors) in item_factors.iter_mut().enumerate() {
        for value in factors.iter_mut() {
            *value = rng.random_range(0.0..0.2);
        }
        let dim = rng.random_range(0..k);
        factors[dim] = rng.random_range(0.8..1.2);
        dominant_dim[i] = dim;
        items_by_dim[dim].push(i as u32);
    }

    // User factors: background preference, then friend pairs overwrite one
    // agreed dimension with a common high value.
    let mut user_factors = vec![vec![0.0f64; k]; spec.users];
    for factors in user_factors.iter_mut() {
        for value in factors.iter_mut() {
            *value = rng.random_range(0.0..0.6);
        }
    }

    // Friend pairs with an agreed dimension each.
    let mut pair_dims: HashMap<(u32, u32), usize> = HashMap::new();
    let mut friend_lists: Vec<Vec<u32>> = vec![Vec::new(); spec.users];
    if spec.shares_per_user > 0 {
        for u in 0..spec.users as u32 {
            // one or two partners per user
            let partners = 1 + (rng.random_range(0..2u32) as usize);
            for _ in 0..partners {
                let mut v = rng.random_range(0..spec.users as u32 - 1);
                if v >= u {
                    v += 1;
                }
                let key = if u < v { (u, v) } else { (v, u) };
                let dim = *pair_dims.entry(key).or_insert_with(|| rng.random_range(0..k));
                let shared = rng.random_range(1.2..1.6);
                user_factors[u as usize][dim] = shared;
                user_factors[v as usize][dim] = shared;
                if !friend_lists[u as usize].contains(&v) {
                    friend_lists[u as usize].push(v);
                    friend_lists[v as usize].push(u);
                }
            }
        }
    }

    let mut dataset = Dataset::new();
    for u in 0..spec.users {
        dataset.users.get_or_insert(&format!("u{u}"));
    }
    for i in 0..spec.items {
        dataset.items.get_or_insert(&format!("i{i}"));
    }

    // Interactions: top-scoring items under noisy inner products.
    let noise_dist = if spec.noise > 0.0 {
        Some(Normal::new(0.0, spec.noise).expect("validated noise"))
    } else {
        None
    };
    for u in 0..spec.users {
        let mut scored: Vec<(f64, u32)> = (0..spec.items)
            .map(|i| {
                let mut score: f64 = user_factors[u]
                    .iter()
                    .zip(&item_factors[i])
                    .map(|(a, b)| a * b)
                    .sum();
                if let Some(dist) = &noise_dist {
                    score += dist.sample(&mut rng);
                }
                (score, i as u32)
            })
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, item) in scored.iter().take(spec.interactions_per_user) {
            dataset.push_interaction(Interaction {
                user: u as u32,
                item,
                value: 1.0,
                timestamp: None,
            });
        }
    }

    // Shares: each user emits triplets with a friend, on items dominated by
    // the pair's agreed dimension.
    if spec.shares_per_user > 0 {
        for u in 0..spec.users as u32 {
            let friends = &friend_lists[u as usize];
            if friends.is_empty() {
                continue;
            }
            for _ in 0..spec.shares_per_user {
                let &v = friends.choose(&mut rng).expect("nonempty");
                let key = if u < v { (u, v) } else { (v, u) };
                let dim = pair_dims[&key];
                let pool = if items_by_dim[dim].is_empty() {
                    // no item carries this dimension; fall back to any item
                    (0..spec.items as u32).collect::<Vec<_>>()
                } else {
                    items_by_dim[dim].clone()
                };
                let &item = pool.choose(&mut rng).expect("nonempty");
                dataset.push_share(ShareTriplet {
                    user: u,
                    friend: v,
                    item,
                });
            }
        }
    }

    Ok(dataset)
}
