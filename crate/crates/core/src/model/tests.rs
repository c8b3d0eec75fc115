use super::*;
use crate::data::{Interaction, SocialStrengths};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(k: usize, users: &[&[f64]], items: &[&[f64]]) -> EmbeddingTable {
    let mut emb = EmbeddingTable::zeros(users.len(), items.len(), k);
    for (u, vec) in users.iter().enumerate() {
        emb.user_vec_mut(u as u32).copy_from_slice(vec);
    }
    for (i, vec) in items.iter().enumerate() {
        emb.item_vec_mut(i as u32).copy_from_slice(vec);
    }
    emb
}

fn random_table(users: usize, items: usize, k: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emb = EmbeddingTable::zeros(users, items, k);
    for v in emb.p.iter_mut().chain(emb.q.iter_mut()) {
        *v = rng.random_range(-1.0..1.0);
    }
    emb
}

#[test]
fn predict_is_inner_product() {
    let emb = table(2, &[&[1.0, 2.0]], &[&[3.0, 4.0]]);
    assert_eq!(predict(&emb, 0, 0).unwrap(), 11.0);
}

#[test]
fn predict_zero_item_vector_scores_zero() {
    let emb = table(2, &[&[1.0, 2.0], &[-3.0, 0.5]], &[&[0.0, 0.0]]);
    assert_eq!(predict(&emb, 0, 0).unwrap(), 0.0);
    assert_eq!(predict(&emb, 1, 0).unwrap(), 0.0);
}

#[test]
fn predict_matches_scalar_loop_oracle() {
    let emb = random_table(3, 4, 8, 99);
    for u in 0..3u32 {
        for i in 0..4u32 {
            let mut expected = 0.0;
            for d in 0..8 {
                expected += emb.user_vec(u)[d] * emb.item_vec(i)[d];
            }
            assert!((predict(&emb, u, i).unwrap() - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn predict_rejects_out_of_range() {
    let emb = table(2, &[&[1.0, 2.0]], &[&[3.0, 4.0]]);
    assert!(predict(&emb, 1, 0).is_err());
    assert!(predict(&emb, 0, 1).is_err());
}

fn dataset_with(interactions: &[(u32, u32, f64)]) -> crate::data::Dataset {
    let mut ds = crate::data::Dataset::new();
    for &(u, i, v) in interactions {
        ds.users.get_or_insert(&format!("u{u}"));
        ds.items.get_or_insert(&format!("i{i}"));
        ds.push_interaction(Interaction {
            user: u,
            item: i,
            value: v,
            timestamp: None,
        });
    }
    ds
}

#[test]
fn pointwise_loss_zero_on_perfect_reconstruction() {
    let emb = table(1, &[&[1.0]], &[&[1.0]]);
    let ds = dataset_with(&[(0, 0, 1.0)]);
    assert_eq!(pointwise_loss(&emb, &ds, 0.0, 0.0), 0.0);
}

#[test]
fn pointwise_loss_single_miss_is_one() {
    let emb = table(1, &[&[0.0]], &[&[1.0]]);
    let ds = dataset_with(&[(0, 0, 1.0)]);
    assert_eq!(pointwise_loss(&emb, &ds, 0.0, 0.0), 1.0);
}

#[test]
fn pointwise_loss_matches_term_by_term_oracle() {
    let emb = random_table(2, 3, 4, 7);
    let ds = dataset_with(&[(0, 0, 1.0), (0, 2, 1.0), (1, 1, 1.0)]);
    let (lp, lq) = (0.01, 0.02);
    let mut expected = 0.0;
    for r in ds.interactions() {
        let e = r.value - dot(emb.user_vec(r.user), emb.item_vec(r.item));
        expected += e * e;
    }
    expected += lp * emb.p.iter().map(|x| x * x).sum::<f64>();
    expected += lq * emb.q.iter().map(|x| x * x).sum::<f64>();
    assert!((pointwise_loss(&emb, &ds, lp, lq) - expected).abs() < 1e-12);
}

#[test]
fn bpr_loss_equal_scores_is_ln_two() {
    let emb = table(2, &[&[1.0, 0.0]], &[&[0.5, 0.0], &[0.5, 0.0]]);
    let loss = bpr_loss(&emb, 0, 0, 1, 0.0, 0.0).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn bpr_loss_saturates_for_large_gaps() {
    let emb = table(1, &[&[1.0]], &[&[20.0], &[0.0]]);
    let loss = bpr_loss(&emb, 0, 0, 1, 0.0, 0.0).unwrap();
    assert!(loss < 1e-8);
}

#[test]
fn bpr_loss_matches_direct_formula() {
    let emb = random_table(1, 2, 6, 21);
    let x_i = dot(emb.user_vec(0), emb.item_vec(0));
    let x_j = dot(emb.user_vec(0), emb.item_vec(1));
    let expected = -sigmoid(x_i - x_j).ln();
    let loss = bpr_loss(&emb, 0, 0, 1, 0.0, 0.0).unwrap();
    assert!((loss - expected).abs() < 1e-12);
}

#[test]
fn bpr_loss_rejects_equal_items() {
    let emb = random_table(1, 2, 2, 3);
    assert!(matches!(
        bpr_loss(&emb, 0, 1, 1, 0.0, 0.0),
        Err(Error::InvalidPair { item: 1 })
    ));
}

#[test]
fn weighted_sum_zero_when_friend_identical() {
    let emb = table(2, &[&[0.3, -0.4], &[0.3, -0.4]], &[]);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 1, 1.0);
    assert_eq!(social_reg_weighted_sum(&emb, &strengths), 0.0);
}

#[test]
fn weighted_sum_orthogonal_unit_vectors() {
    let emb = table(2, &[&[1.0, 0.0], &[0.0, 1.0]], &[]);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 1, 1.0);
    // both sides contribute ||(1,-1)||^2 = 2
    assert_eq!(social_reg_weighted_sum(&emb, &strengths), 4.0);
}

#[test]
fn weighted_sum_matches_hand_expansion() {
    // user 0 with friends 1 and 2 at strength 0.5 each; users 1, 2 see
    // user 0 back at the same strength.
    let emb = table(
        2,
        &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]],
        &[],
    );
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 1, 0.5);
    strengths.insert(0, 2, 0.5);

    let expand = |u: &[f64], friends: &[(&[f64], f64)]| -> f64 {
        let mut residual = [u[0], u[1]];
        for (f, s) in friends {
            residual[0] -= s * f[0];
            residual[1] -= s * f[1];
        }
        residual[0] * residual[0] + residual[1] * residual[1]
    };
    let expected = expand(&[1.0, 0.0], &[(&[0.0, 1.0], 0.5), (&[1.0, 1.0], 0.5)])
        + expand(&[0.0, 1.0], &[(&[1.0, 0.0], 0.5)])
        + expand(&[1.0, 1.0], &[(&[1.0, 0.0], 0.5)]);
    assert!((social_reg_weighted_sum(&emb, &strengths) - expected).abs() < 1e-12);
}

#[test]
fn sum_weighted_distance_zero_for_identical_friends() {
    let emb = table(2, &[&[0.7, 0.1], &[0.7, 0.1]], &[]);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 1, 0.9);
    assert_eq!(social_reg_sum_weighted_distance(&emb, &strengths), 0.0);
}

#[test]
fn sum_weighted_distance_single_pair() {
    let emb = table(2, &[&[2.0, 0.0], &[0.0, 0.0]], &[]);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 1, 0.5);
    // each direction contributes 0.5 * 4
    assert_eq!(social_reg_sum_weighted_distance(&emb, &strengths), 4.0);
}

#[test]
fn sum_weighted_distance_matches_double_loop_oracle() {
    let emb = random_table(5, 0, 3, 31);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 1, 0.3);
    strengths.insert(1, 2, 0.8);
    strengths.insert(3, 4, 0.5);
    strengths.insert(0, 4, 1.0);

    let mut expected = 0.0;
    for (u, v, s) in strengths.pairs() {
        let d2: f64 = emb
            .user_vec(u)
            .iter()
            .zip(emb.user_vec(v))
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        expected += 2.0 * s * d2; // both directions
    }
    assert!((social_reg_sum_weighted_distance(&emb, &strengths) - expected).abs() < 1e-12);
}

fn unit_pairs(strengths: &SocialStrengths, num_users: usize, k: usize) -> Vec<WeightedPair> {
    crate::train::unit_weight_pairs(strengths, num_users, k)
}

#[test]
fn csr_general_all_ones_reduces_to_distance() {
    let emb = random_table(6, 0, 4, 77);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 3, 1.0);
    strengths.insert(2, 5, 1.0);
    strengths.insert(1, 4, 1.0);
    let pairs = unit_pairs(&strengths, 6, 4);
    let general = csr_reg_general(&emb, &pairs).unwrap();
    let distance = social_reg_sum_weighted_distance(&emb, &strengths);
    assert!((general - distance).abs() <= 1e-10 * distance.abs().max(1.0));
}

#[test]
fn csr_general_all_zero_weights_vanish() {
    let emb = random_table(4, 0, 3, 5);
    let pairs = vec![WeightedPair {
        user: 0,
        friend: 1,
        weights: vec![0.0; 3],
    }];
    assert_eq!(csr_reg_general(&emb, &pairs).unwrap(), 0.0);
}

#[test]
fn csr_general_hand_example() {
    let emb = table(2, &[&[1.0, 2.0], &[1.0, 0.0]], &[]);
    let pairs = vec![WeightedPair {
        user: 0,
        friend: 1,
        weights: vec![0.5, 1.0],
    }];
    // (0 * 0.5)^2 + (2 * 1)^2 = 4
    assert_eq!(csr_reg_general(&emb, &pairs).unwrap(), 4.0);
}

#[test]
fn csr_general_rejects_wrong_weight_length() {
    let emb = random_table(2, 0, 3, 1);
    let pairs = vec![WeightedPair {
        user: 0,
        friend: 1,
        weights: vec![1.0; 2],
    }];
    assert!(matches!(
        csr_reg_general(&emb, &pairs),
        Err(Error::DimensionMismatch { expected: 3, got: 2 })
    ));
}

fn share(u: u32, v: u32, i: u32) -> ShareTriplet {
    ShareTriplet {
        user: u,
        friend: v,
        item: i,
    }
}

#[test]
fn product_sharing_empty_log_is_zero() {
    let emb = random_table(2, 2, 3, 11);
    assert_eq!(csr_reg_product_sharing(&emb, &[]).unwrap(), 0.0);
}

#[test]
fn product_sharing_hand_example() {
    let emb = table(2, &[&[1.0, 2.0], &[1.0, 0.0]], &[&[0.5, 1.0]]);
    let value = csr_reg_product_sharing(&emb, &[share(0, 1, 0)]).unwrap();
    assert_eq!(value, 4.0);
}

#[test]
fn product_sharing_zero_for_identical_users() {
    let emb = table(2, &[&[0.4, -0.2], &[0.4, -0.2]], &[&[1.0, 3.0]]);
    let value = csr_reg_product_sharing(&emb, &[share(0, 1, 0), share(1, 0, 0)]).unwrap();
    assert_eq!(value, 0.0);
}

#[test]
fn product_sharing_symmetric_in_pair_order() {
    let emb = random_table(3, 2, 4, 13);
    let forward = csr_reg_product_sharing(&emb, &[share(0, 2, 1)]).unwrap();
    let backward = csr_reg_product_sharing(&emb, &[share(2, 0, 1)]).unwrap();
    assert_eq!(forward, backward);
}

#[test]
fn total_objective_with_zero_lambda_is_interaction_loss() {
    let emb = random_table(3, 4, 2, 17);
    let ds = dataset_with(&[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
    let strengths = SocialStrengths::new();
    let spec = RegularizerSpec::new(RegularizerKind::CsrProductSharing, 0.0);
    let total = total_objective(
        &emb,
        &ds,
        &strengths,
        &spec,
        LossManner::Pointwise,
        0.01,
        0.01,
    )
    .unwrap();
    assert_eq!(total, pointwise_loss(&emb, &ds, 0.01, 0.01));
}

#[test]
fn total_objective_reduction_special_case() {
    let emb = random_table(4, 3, 3, 19);
    let ds = dataset_with(&[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 0, 1.0)]);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 1, 1.0);
    strengths.insert(2, 3, 1.0);
    let general = RegularizerSpec::new(
        RegularizerKind::CsrGeneral {
            pairs: unit_pairs(&strengths, 4, 3),
        },
        0.05,
    );
    let distance = RegularizerSpec::new(RegularizerKind::SumWeightedDistance, 0.05);
    let a = total_objective(&emb, &ds, &strengths, &general, LossManner::Pointwise, 0.01, 0.01)
        .unwrap();
    let b = total_objective(&emb, &ds, &strengths, &distance, LossManner::Pointwise, 0.01, 0.01)
        .unwrap();
    assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
}

#[test]
fn total_objective_is_sum_of_parts() {
    let emb = random_table(4, 5, 3, 23);
    let mut ds = dataset_with(&[(0, 1, 1.0), (1, 3, 1.0), (2, 4, 1.0), (3, 0, 1.0)]);
    ds.push_share(share(0, 1, 2));
    ds.push_share(share(2, 3, 4));
    let strengths = SocialStrengths::from_shares(ds.shares());
    let spec = RegularizerSpec::new(RegularizerKind::CsrProductSharing, 0.7);
    let total = total_objective(
        &emb,
        &ds,
        &strengths,
        &spec,
        LossManner::Pairwise,
        0.01,
        0.01,
    )
    .unwrap();
    let parts = pairwise_batch_loss(&emb, &ds, 0.01, 0.01)
        + 0.7 * csr_reg_product_sharing(&emb, ds.shares()).unwrap();
    assert!((total - parts).abs() < 1e-12);
}

#[test]
fn regularizers_are_nonnegative() {
    let emb = random_table(6, 4, 3, 29);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 1, 0.4);
    strengths.insert(2, 3, 0.9);
    assert!(social_reg_weighted_sum(&emb, &strengths) >= 0.0);
    assert!(social_reg_sum_weighted_distance(&emb, &strengths) >= 0.0);
    let pairs = unit_pairs(&strengths, 6, 3);
    assert!(csr_reg_general(&emb, &pairs).unwrap() >= 0.0);
    let shares = [share(0, 1, 0), share(2, 3, 1)];
    assert!(csr_reg_product_sharing(&emb, &shares).unwrap() >= 0.0);
}

#[test]
fn csr_scale_law() {
    let emb = random_table(5, 0, 4, 37);
    let mut strengths = SocialStrengths::new();
    strengths.insert(0, 2, 1.0);
    strengths.insert(1, 4, 1.0);
    let mut pairs = unit_pairs(&strengths, 5, 4);
    let base = csr_reg_general(&emb, &pairs).unwrap();
    for pair in &mut pairs {
        for w in &mut pair.weights {
            *w *= 3.0;
        }
    }
    let scaled = csr_reg_general(&emb, &pairs).unwrap();
    assert!((scaled - 9.0 * base).abs() <= 1e-9 * base.abs().max(1.0));
}
