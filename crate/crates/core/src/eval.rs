//! Leave-one-out top-K evaluation: HR@K, NDCG@K, per-user ranks, and
//! per-group breakdowns.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{derive_seed, ShareGroup, Split};
use crate::error::{Error, Result};

/// How the candidate list for each test user is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateMode {
    /// Every item the user has not interacted with in train.
    Full,
    /// The held-out item plus `count` seeded-random unobserved items.
    Sampled { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricPair {
    pub hr: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingReport {
    pub model: String,
    pub seed: u64,
    pub cutoffs: Vec<usize>,
    /// Mean metrics per cutoff, keyed by K.
    pub metrics: BTreeMap<usize, MetricPair>,
    /// 1-based rank of each test user's held-out item.
    pub per_user_rank: Vec<(u32, usize)>,
    pub num_test_users: usize,
}

/// Sorts candidates by descending score, ties broken by ascending item index.
pub fn rank_items(scores: &[(u32, f64)]) -> Vec<u32> {
    let mut order: Vec<(u32, f64)> = scores.to_vec();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    order.into_iter().map(|(i, _)| i).collect()
}

/// 1 iff the held-out item's rank is within the cutoff.
pub fn hit_rate_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

/// With a single relevant item the ideal DCG is 1, so per-user NDCG is
/// 1/log2(rank+1) inside the cutoff and 0 outside.
pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / ((rank as f64) + 1.0).log2()
    } else {
        0.0
    }
}

/// Rank of the held-out item among the candidates under score-desc,
/// index-asc ordering, computed without materializing the sort.
pub fn rank_of(scores: &[(u32, f64)], held_out: u32) -> Option<usize> {
    let held_score = scores.iter().find(|&&(i, _)| i == held_out)?.1;
    let ahead = scores
        .iter()
        .filter(|&&(i, s)| s > held_score || (s == held_score && i < held_out))
        .count();
    Some(ahead + 1)
}

/// Evaluates a scorer over a leave-one-out split. The candidate set for each
/// user excludes the user's train interactions and always contains the
/// held-out item.
pub fn evaluate(
    scorer: &dyn Fn(u32, u32) -> f64,
    split: &Split,
    cutoffs: &[usize],
    mode: CandidateMode,
    model: &str,
    seed: u64,
) -> Result<RankingReport> {
    let num_items = split.train.num_items() as u32;
    let mut per_user_rank = Vec::with_capacity(split.test.len());

    for &(user, held_out) in &split.test {
        let mut candidates: Vec<u32> = (0..num_items)
            .filter(|&i| i == held_out || !split.train.is_observed(user, i))
            .collect();
        if let CandidateMode::Sampled { count, seed } = mode {
            let mut pool: Vec<u32> = candidates
                .iter()
                .copied()
                .filter(|&i| i != held_out)
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x10000 + user as u64));
            pool.shuffle(&mut rng);
            pool.truncate(count);
            pool.push(held_out);
            candidates = pool;
        }
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates { user });
        }
        let scores: Vec<(u32, f64)> = candidates.iter().map(|&i| (i, scorer(user, i))).collect();
        let rank = rank_of(&scores, held_out).expect("held-out item is a candidate");
        per_user_rank.push((user, rank));
    }

    let mut metrics = BTreeMap::new();
    for &k in cutoffs {
        let n = per_user_rank.len().max(1) as f64;
        let hr = per_user_rank
            .iter()
            .map(|&(_, r)| hit_rate_at_k(r, k))
            .sum::<f64>()
            / n;
        let ndcg = per_user_rank
            .iter()
            .map(|&(_, r)| ndcg_at_k(r, k))
            .sum::<f64>()
            / n;
        metrics.insert(k, MetricPair { hr, ndcg });
    }

    Ok(RankingReport {
        model: model.to_string(),
        seed,
        cutoffs: cutoffs.to_vec(),
        metrics,
        num_test_users: per_user_rank.len(),
        per_user_rank,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    /// Populated groups only: label -> (user count in test, metrics per K).
    pub groups: BTreeMap<String, GroupMetrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupMetrics {
    pub test_users: usize,
    pub metrics: BTreeMap<usize, MetricPair>,
}

/// Restricts the report's metrics to each share-count group. Groups with no
/// test users are absent from the result.
pub fn group_report(
    report: &RankingReport,
    groups: &BTreeMap<ShareGroup, Vec<u32>>,
) -> GroupReport {
    let mut out = BTreeMap::new();
    for group in ShareGroup::ALL {
        let Some(members) = groups.get(&group) else {
            continue;
        };
        let ranks: Vec<usize> = report
            .per_user_rank
            .iter()
            .filter(|(u, _)| members.contains(u))
            .map(|&(_, r)| r)
            .collect();
        if ranks.is_empty() {
            continue;
        }
        let n = ranks.len() as f64;
        let mut metrics = BTreeMap::new();
        for &k in &report.cutoffs {
            let hr = ranks.iter().map(|&r| hit_rate_at_k(r, k)).sum::<f64>() / n;
            let ndcg = ranks.iter().map(|&r| ndcg_at_k(r, k)).sum::<f64>() / n;
            metrics.insert(k, MetricPair { hr, ndcg });
        }
        out.insert(
            group.label().to_string(),
            GroupMetrics {
                test_users: ranks.len(),
                metrics,
            },
        );
    }
    GroupReport { groups: out }
}

pub fn write_report_json(report: &RankingReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, json).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Flat CSV: model, K, HR, NDCG, group ("all" for the global rows).
pub fn write_report_csv(
    report: &RankingReport,
    groups: Option<&GroupReport>,
    path: &Path,
) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut file = std::fs::File::create(path).map_err(io)?;
    writeln!(file, "model,K,HR,NDCG,group").map_err(io)?;
    for (&k, pair) in &report.metrics {
        writeln!(file, "{},{},{},{},all", report.model, k, pair.hr, pair.ndcg).map_err(io)?;
    }
    if let Some(group_report) = groups {
        for (label, gm) in &group_report.groups {
            for (&k, pair) in &gm.metrics {
                writeln!(file, "{},{},{},{},{}", report.model, k, pair.hr, pair.ndcg, label)
                    .map_err(io)?;
            }
        }
    }
    Ok(())
}
