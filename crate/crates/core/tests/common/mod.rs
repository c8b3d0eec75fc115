use csr_core::data::{Dataset, Interaction, ShareTriplet, SocialStrengths};
use csr_core::model::EmbeddingTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random dataset with interactions and a share log.
pub fn random_dataset(seed: u64, num_users: usize, num_items: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::new();
    for u in 0..num_users {
        ds.users.get_or_insert(&format!("u{u}"));
    }
    for i in 0..num_items {
        ds.items.get_or_insert(&format!("i{i}"));
    }
    for u in 0..num_users as u32 {
        let count = rng.random_range(1..=3.min(num_items));
        for _ in 0..count {
            ds.push_interaction(Interaction {
                user: u,
                item: rng.random_range(0..num_items as u32),
                value: if rng.random_bool(0.5) { 1.0 } else { 0.5 },
                timestamp: None,
            });
        }
    }
    if num_users >= 2 {
        for _ in 0..rng.random_range(1..=4) {
            let u = rng.random_range(0..num_users as u32);
            let mut v = rng.random_range(0..num_users as u32 - 1);
            if v >= u {
                v += 1;
            }
            ds.push_share(ShareTriplet {
                user: u,
                friend: v,
                item: rng.random_range(0..num_items as u32),
            });
        }
    }
    ds
}

pub fn random_embeddings(seed: u64, num_users: usize, num_items: usize, k: usize) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emb = EmbeddingTable::zeros(num_users, num_items, k);
    for v in emb.p.iter_mut().chain(emb.q.iter_mut()) {
        *v = rng.random_range(-0.8..0.8);
    }
    emb
}

/// Unit-strength social graph over the pairs that appear in the share log.
pub fn unit_strengths(ds: &Dataset) -> SocialStrengths {
    let mut s = SocialStrengths::new();
    for t in ds.shares() {
        s.insert(t.user, t.friend, 1.0);
    }
    s
}
