//! Dataset ingestion: interaction and share logs, ID indexing, leave-one-out
//! splitting, user grouping by share activity, and synthetic corpora.

mod synthetic;

pub use synthetic::{generate_synthetic, SyntheticSpec};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::prelude::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Mixes a label into a base seed so independent consumers get
/// independent ChaCha streams from one experiment seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ label.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// External-ID to dense-index bijection, first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, external: &str) -> Option<u32> {
        self.index.get(external).copied()
    }

    pub fn get_or_insert(&mut self, external: &str) -> u32 {
        if let Some(&idx) = self.index.get(external) {
            return idx;
        }
        let idx = self.ids.len() as u32;
        self.ids.push(external.to_string());
        self.index.insert(external.to_string(), idx);
        idx
    }

    pub fn external_id(&self, idx: u32) -> &str {
        &self.ids[idx as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionMode {
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub value: f64,
    pub timestamp: Option<i64>,
}

/// A product-sharing log record: user shared item with friend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShareTriplet {
    pub user: u32,
    pub friend: u32,
    pub item: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub users: IdMap,
    pub items: IdMap,
    interactions: Vec<Interaction>,
    observed: HashSet<(u32, u32)>,
    items_by_user: Vec<Vec<u32>>,
    shares: Vec<ShareTriplet>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn shares(&self) -> &[ShareTriplet] {
        &self.shares
    }

    pub fn is_observed(&self, user: u32, item: u32) -> bool {
        self.observed.contains(&(user, item))
    }

    /// Items the user has interacted with, in insertion order.
    pub fn items_of(&self, user: u32) -> &[u32] {
        self.items_by_user
            .get(user as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn ensure_user_slot(&mut self, user: u32) {
        if self.items_by_user.len() <= user as usize {
            self.items_by_user.resize(user as usize + 1, Vec::new());
        }
    }

    /// Adds an interaction. Duplicate (user, item) pairs overwrite the stored
    /// value and timestamp (last-write-wins) rather than adding a record.
    pub fn push_interaction(&mut self, rec: Interaction) {
        if self.observed.insert((rec.user, rec.item)) {
            self.ensure_user_slot(rec.user);
            self.items_by_user[rec.user as usize].push(rec.item);
            self.interactions.push(rec);
        } else if let Some(existing) = self
            .interactions
            .iter_mut()
            .find(|r| r.user == rec.user && r.item == rec.item)
        {
            existing.value = rec.value;
            existing.timestamp = rec.timestamp;
        }
    }

    pub fn push_share(&mut self, triplet: ShareTriplet) {
        self.shares.push(triplet);
    }

    /// Number of share records in which the user appears on either side.
    pub fn share_count_of(&self, user: u32) -> usize {
        self.shares
            .iter()
            .filter(|t| t.user == user || t.friend == user)
            .count()
    }

    /// Reads an interactions CSV with header `user_id,item_id[,rating][,timestamp]`.
    pub fn load_interactions(path: &Path, mode: InteractionMode) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)
            .map_err(|e| io_err(path, e))?;

        let headers = reader.headers().map_err(|e| io_err(path, e))?.clone();
        if headers.iter().all(|h| h.is_empty()) {
            // zero-byte file: no records, no ids
            return Ok(Dataset::new());
        }
        let col = |name: &str| headers.iter().position(|h| h == name);
        let user_col = col("user_id").ok_or_else(|| Error::Schema {
            line: 1,
            msg: "missing user_id column".into(),
        })?;
        let item_col = col("item_id").ok_or_else(|| Error::Schema {
            line: 1,
            msg: "missing item_id column".into(),
        })?;
        let rating_col = col("rating");
        let ts_col = col("timestamp");

        if mode == InteractionMode::Explicit && rating_col.is_none() {
            return Err(Error::Schema {
                line: 1,
                msg: "explicit mode requires a rating column".into(),
            });
        }

        let mut dataset = Dataset::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2; // 1-based, after header
            let record = record.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            let field = |idx: usize| -> Result<&str> {
                record.get(idx).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing field {idx}"),
                })
            };
            let user = dataset.users.get_or_insert(field(user_col)?);
            let item = dataset.items.get_or_insert(field(item_col)?);
            let value = match (mode, rating_col) {
                (InteractionMode::Implicit, _) => 1.0,
                (InteractionMode::Explicit, Some(c)) => {
                    let raw = field(c)?;
                    if raw.is_empty() {
                        return Err(Error::Schema {
                            line,
                            msg: "empty rating in explicit mode".into(),
                        });
                    }
                    raw.parse::<f64>().map_err(|e| Error::Parse {
                        line,
                        msg: format!("bad rating '{raw}': {e}"),
                    })?
                }
                (InteractionMode::Explicit, None) => unreachable!(),
            };
            let timestamp = match ts_col.and_then(|c| record.get(c)) {
                Some("") | None => None,
                Some(raw) => Some(raw.parse::<i64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad timestamp '{raw}': {e}"),
                })?),
            };
            // Implicit duplicates collapse via set semantics in push_interaction.
            dataset.push_interaction(Interaction {
                user,
                item,
                value,
                timestamp,
            });
        }
        Ok(dataset)
    }

    /// Reads a shares CSV with header `user_id,friend_id,item_id` and appends
    /// the triplets to this dataset. Under strict mode, IDs absent from the
    /// existing maps are rejected; otherwise they are admitted and indexed.
    pub fn load_shares(&mut self, path: &Path, strict: bool) -> Result<SocialStrengths> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| io_err(path, e))?;

        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            let get = |idx: usize| -> Result<&str> {
                record.get(idx).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing field {idx}"),
                })
            };
            let (user_raw, friend_raw, item_raw) = (get(0)?, get(1)?, get(2)?);
            if user_raw == friend_raw {
                return Err(Error::SelfShare {
                    record: i,
                    user: user_raw.to_string(),
                });
            }
            let resolve_user = |map: &mut IdMap, raw: &str| -> Result<u32> {
                match map.get(raw) {
                    Some(idx) => Ok(idx),
                    None if strict => Err(Error::UnknownId {
                        kind: "user",
                        id: raw.to_string(),
                        record: i,
                    }),
                    None => Ok(map.get_or_insert(raw)),
                }
            };
            let user = resolve_user(&mut self.users, user_raw)?;
            let friend = resolve_user(&mut self.users, friend_raw)?;
            let item = match self.items.get(item_raw) {
                Some(idx) => idx,
                None if strict => {
                    return Err(Error::UnknownId {
                        kind: "item",
                        id: item_raw.to_string(),
                        record: i,
                    })
                }
                None => self.items.get_or_insert(item_raw),
            };
            self.ensure_user_slot(user.max(friend));
            self.push_share(ShareTriplet { user, friend, item });
        }
        Ok(SocialStrengths::from_shares(&self.shares))
    }

    pub fn write_interactions(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        let has_ts = self.interactions.iter().any(|r| r.timestamp.is_some());
        // ratings are implied 1.0 for implicit data; emit the column only
        // when some value actually carries information
        let has_rating = self.interactions.iter().any(|r| r.value != 1.0);
        let header = match (has_rating, has_ts) {
            (true, true) => "user_id,item_id,rating,timestamp",
            (true, false) => "user_id,item_id,rating",
            (false, true) => "user_id,item_id,timestamp",
            (false, false) => "user_id,item_id",
        };
        writeln!(file, "{header}").map_err(|e| io_err(path, e))?;
        for rec in &self.interactions {
            let mut row = format!(
                "{},{}",
                self.users.external_id(rec.user),
                self.items.external_id(rec.item)
            );
            if has_rating {
                row.push_str(&format!(",{}", rec.value));
            }
            if has_ts {
                match rec.timestamp {
                    Some(ts) => row.push_str(&format!(",{ts}")),
                    None => row.push(','),
                }
            }
            writeln!(file, "{row}").map_err(|e| io_err(path, e))?;
        }
        Ok(())
    }

    pub fn write_shares(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        writeln!(file, "user_id,friend_id,item_id").map_err(|e| io_err(path, e))?;
        for t in &self.shares {
            writeln!(
                file,
                "{},{},{}",
                self.users.external_id(t.user),
                self.users.external_id(t.friend),
                self.items.external_id(t.item)
            )
            .map_err(|e| io_err(path, e))?;
        }
        Ok(())
    }
}

fn io_err(path: &Path, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

/// Scalar social strengths s in (0, 1], keyed by unordered user pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SocialStrengths {
    map: HashMap<(u32, u32), f64>,
}

impl SocialStrengths {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(u: u32, v: u32) -> (u32, u32) {
        if u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    pub fn insert(&mut self, u: u32, v: u32, s: f64) {
        self.map.insert(Self::key(u, v), s);
    }

    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        self.map.get(&Self::key(u, v)).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Unordered pairs with their strength, in deterministic (sorted) order.
    pub fn pairs(&self) -> Vec<(u32, u32, f64)> {
        let mut out: Vec<_> = self.map.iter().map(|(&(u, v), &s)| (u, v, s)).collect();
        out.sort_by_key(|&(u, v, _)| (u, v));
        out
    }

    /// Symmetric adjacency: for each user the list of (friend, strength).
    pub fn adjacency(&self, num_users: usize) -> Vec<Vec<(u32, f64)>> {
        let mut adj = vec![Vec::new(); num_users];
        for (u, v, s) in self.pairs() {
            adj[u as usize].push((v, s));
            adj[v as usize].push((u, s));
        }
        adj
    }

    /// Normalization over share logs: per-pair count divided by the maximum
    /// per-user share total, where a user's total counts appearances on
    /// either side of a triplet. Values land in (0, 1] for nonempty logs.
    pub fn from_shares(shares: &[ShareTriplet]) -> Self {
        let mut pair_counts: HashMap<(u32, u32), usize> = HashMap::new();
        let mut user_totals: HashMap<u32, usize> = HashMap::new();
        for t in shares {
            *pair_counts.entry(Self::key(t.user, t.friend)).or_default() += 1;
            *user_totals.entry(t.user).or_default() += 1;
            *user_totals.entry(t.friend).or_default() += 1;
        }
        let max_total = user_totals.values().copied().max().unwrap_or(0);
        let mut strengths = Self::new();
        if max_total == 0 {
            return strengths;
        }
        for ((u, v), count) in pair_counts {
            let s = (count as f64 / max_total as f64).min(1.0);
            strengths.map.insert((u, v), s);
        }
        strengths
    }
}

/// Leave-one-out split: one held-out interaction per eligible user.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Vec<(u32, u32)>,
    /// Users with a single interaction that stayed train-only.
    pub train_only_users: usize,
}

/// Holds out one interaction per user with at least two. The held-out item is
/// the one with the latest timestamp when the user's records all carry one,
/// otherwise a seeded-uniform choice. Deterministic for a fixed seed.
pub fn leave_one_out_split(dataset: &Dataset, seed: u64) -> Split {
    let mut held_out: HashSet<(u32, u32)> = HashSet::new();
    let mut test = Vec::new();
    let mut train_only_users = 0usize;

    for user in 0..dataset.num_users() as u32 {
        let user_recs: Vec<&Interaction> = dataset
            .interactions
            .iter()
            .filter(|r| r.user == user)
            .collect();
        if user_recs.len() < 2 {
            if user_recs.len() == 1 {
                train_only_users += 1;
            }
            continue;
        }
        let chosen = if user_recs.iter().all(|r| r.timestamp.is_some()) {
            user_recs
                .iter()
                .max_by_key(|r| (r.timestamp.unwrap(), r.item))
                .unwrap()
                .item
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, user as u64));
            user_recs.choose(&mut rng).unwrap().item
        };
        held_out.insert((user, chosen));
        test.push((user, chosen));
    }

    let mut train = Dataset {
        users: dataset.users.clone(),
        items: dataset.items.clone(),
        ..Dataset::new()
    };
    train.ensure_user_slot(dataset.num_users().saturating_sub(1) as u32);
    for rec in &dataset.interactions {
        if !held_out.contains(&(rec.user, rec.item)) {
            train.push_interaction(*rec);
        }
    }
    for t in &dataset.shares {
        train.push_share(*t);
    }

    Split {
        train,
        test,
        train_only_users,
    }
}

/// The four share-activity bands used for per-group reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ShareGroup {
    Zero,
    One,
    TwoToThree,
    MoreThanThree,
}

impl ShareGroup {
    pub const ALL: [ShareGroup; 4] = [
        ShareGroup::Zero,
        ShareGroup::One,
        ShareGroup::TwoToThree,
        ShareGroup::MoreThanThree,
    ];

    pub fn of_count(count: usize) -> Self {
        match count {
            0 => ShareGroup::Zero,
            1 => ShareGroup::One,
            2 | 3 => ShareGroup::TwoToThree,
            _ => ShareGroup::MoreThanThree,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ShareGroup::Zero => "0",
            ShareGroup::One => "1",
            ShareGroup::TwoToThree => "2-3",
            ShareGroup::MoreThanThree => ">3",
        }
    }
}

/// Partitions users by how many share records they appear in (either side).
pub fn group_users_by_share_count(dataset: &Dataset) -> BTreeMap<ShareGroup, Vec<u32>> {
    let mut counts = vec![0usize; dataset.num_users()];
    for t in &dataset.shares {
        if (t.user as usize) < counts.len() {
            counts[t.user as usize] += 1;
        }
        if (t.friend as usize) < counts.len() {
            counts[t.friend as usize] += 1;
        }
    }
    let mut groups: BTreeMap<ShareGroup, Vec<u32>> = BTreeMap::new();
    for (user, &count) in counts.iter().enumerate() {
        groups
            .entry(ShareGroup::of_count(count))
            .or_default()
            .push(user as u32);
    }
    groups
}
