//! Interaction-log ingestion, k-core filtering, splitting and persistence.
//!
//! The pipeline is `load_interactions` -> `k_core_filter` -> `split_dataset`
//! -> `save_dataset`. All functions are pure over their inputs and
//! deterministic for a fixed seed.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk dataset format version.
pub const DATASET_VERSION: u32 = 1;

/// Input file format for raw interaction logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Tsv,
    Csv,
}

impl InputFormat {
    fn separator(self) -> char {
        match self {
            InputFormat::Tsv => '\t',
            InputFormat::Csv => ',',
        }
    }

    /// Guess the format from a file extension, defaulting to TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => InputFormat::Csv,
            _ => InputFormat::Tsv,
        }
    }
}

/// A single raw interaction record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub user: String,
    pub item: String,
    pub timestamp: Option<i64>,
}

/// Raw, token-level interactions before any ID mapping.
///
/// Duplicates are allowed at this stage; timestamps, when present, are
/// nonnegative (negative ones are rejected as malformed at load time).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawInteractions {
    pub records: Vec<RawRecord>,
    /// Number of non-blank input lines that could not be parsed.
    pub malformed_lines: usize,
}

impl RawInteractions {
    pub fn from_pairs<S: Into<String> + Clone>(pairs: &[(S, S)]) -> Self {
        RawInteractions {
            records: pairs
                .iter()
                .map(|(u, i)| RawRecord {
                    user: u.clone().into(),
                    item: i.clone().into(),
                    timestamp: None,
                })
                .collect(),
            malformed_lines: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Parse a TSV/CSV interaction log with columns
/// `user_id<SEP>item_id[<SEP>timestamp]`.
///
/// A header is auto-detected when the first non-blank line carries a
/// non-numeric third column. Lines with fewer than two columns or a bad
/// timestamp are counted as malformed and skipped; more than 1% malformed
/// lines is a fatal parse error.
pub fn load_interactions(path: &Path, format: InputFormat) -> Result<RawInteractions> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sep = format.separator();

    let mut records = Vec::new();
    let mut malformed = 0usize;
    let mut total = 0usize;
    let mut first_line = true;

    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(sep).collect();
        if first_line {
            first_line = false;
            // Header heuristic: a third column that is not an integer.
            if cols.len() >= 3 && cols[2].trim().parse::<i64>().is_err() {
                continue;
            }
        }
        total += 1;
        if cols.len() < 2 || cols[0].is_empty() || cols[1].is_empty() {
            malformed += 1;
            continue;
        }
        let timestamp = if cols.len() >= 3 {
            match cols[2].trim().parse::<i64>() {
                Ok(ts) if ts >= 0 => Some(ts),
                _ => {
                    malformed += 1;
                    continue;
                }
            }
        } else {
            None
        };
        records.push(RawRecord {
            user: cols[0].to_string(),
            item: cols[1].to_string(),
            timestamp,
        });
    }

    if total > 0 && (malformed as f64) > 0.01 * total as f64 {
        return Err(Error::TooManyMalformed {
            path: path.to_path_buf(),
            malformed,
            total,
        });
    }
    if records.is_empty() {
        log::warn!("{}: no interaction records parsed", path.display());
    }
    Ok(RawInteractions {
        records,
        malformed_lines: malformed,
    })
}

/// Collapse duplicate (user, item) pairs, keeping the earliest timestamp
/// (first occurrence when timestamps are absent or tied).
fn dedup_records(records: &[RawRecord]) -> Vec<RawRecord> {
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut out: Vec<RawRecord> = Vec::new();
    for rec in records {
        let key = (rec.user.clone(), rec.item.clone());
        match index.get(&key) {
            Some(&pos) => {
                if let (Some(new_ts), Some(old_ts)) = (rec.timestamp, out[pos].timestamp) {
                    if new_ts < old_ts {
                        out[pos].timestamp = Some(new_ts);
                    }
                }
            }
            None => {
                index.insert(key, out.len());
                out.push(rec.clone());
            }
        }
    }
    out
}

/// Iteratively remove users with fewer than `k_user` interactions and items
/// with fewer than `k_item` until a fixed point. Duplicate pairs are
/// collapsed first.
pub fn k_core_filter(raw: RawInteractions, k_user: usize, k_item: usize) -> Result<RawInteractions> {
    if k_user == 0 || k_item == 0 {
        return Err(Error::InvalidInput(
            "k-core thresholds must be at least 1".into(),
        ));
    }
    let mut records = dedup_records(&raw.records);

    loop {
        let mut user_deg: HashMap<&str, usize> = HashMap::new();
        let mut item_deg: HashMap<&str, usize> = HashMap::new();
        for r in &records {
            *user_deg.entry(r.user.as_str()).or_default() += 1;
            *item_deg.entry(r.item.as_str()).or_default() += 1;
        }
        let before = records.len();
        let keep: Vec<bool> = records
            .iter()
            .map(|r| user_deg[r.user.as_str()] >= k_user && item_deg[r.item.as_str()] >= k_item)
            .collect();
        let mut idx = 0;
        records.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
        if records.len() == before {
            break;
        }
    }

    if records.is_empty() {
        return Err(Error::DatasetEliminated);
    }
    Ok(RawInteractions {
        records,
        malformed_lines: raw.malformed_lines,
    })
}

/// Bidirectional token <-> dense-index map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn from_sorted_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, idx: u32) -> &str {
        &self.tokens[idx as usize]
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }
}

/// ID-mapped interactions with train/valid/test splits.
///
/// Indices are dense in `[0, num_users)` x `[0, num_items)`, the splits are
/// pairwise disjoint, and every user and item appears in train at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub num_users: usize,
    pub num_items: usize,
    pub train: Vec<(u32, u32)>,
    pub valid: Vec<(u32, u32)>,
    pub test: Vec<(u32, u32)>,
    pub user_vocab: Vocab,
    pub item_vocab: Vocab,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

/// Which split to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl InteractionDataset {
    /// Build a dataset directly from index pairs (tokens are the decimal
    /// indices). Every user and item in range must appear in train.
    pub fn from_index_pairs(
        num_users: usize,
        num_items: usize,
        train: Vec<(u32, u32)>,
        valid: Vec<(u32, u32)>,
        test: Vec<(u32, u32)>,
    ) -> Result<Self> {
        for &(u, i) in train.iter().chain(&valid).chain(&test) {
            if u as usize >= num_users || i as usize >= num_items {
                return Err(Error::InvalidInput(format!(
                    "pair ({u},{i}) out of range {num_users}x{num_items}"
                )));
            }
        }
        let make_vocab = |n: usize| {
            let tokens: Vec<String> = (0..n).map(|k| k.to_string()).collect();
            let index = tokens
                .iter()
                .enumerate()
                .map(|(k, t)| (t.clone(), k as u32))
                .collect();
            Vocab { tokens, index }
        };
        Ok(InteractionDataset {
            num_users,
            num_items,
            train,
            valid,
            test,
            user_vocab: make_vocab(num_users),
            item_vocab: make_vocab(num_items),
            ratios: (0.8, 0.1, 0.1),
            seed: 0,
        })
    }

    pub fn split(&self, split: Split) -> &[(u32, u32)] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Per-user sorted item lists for a split.
    pub fn user_items(&self, split: Split) -> Vec<Vec<u32>> {
        let mut lists = vec![Vec::new(); self.num_users];
        for &(u, i) in self.split(split) {
            lists[u as usize].push(i);
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        lists
    }

    /// Per-item sorted user lists for a split.
    pub fn item_users(&self, split: Split) -> Vec<Vec<u32>> {
        let mut lists = vec![Vec::new(); self.num_items];
        for &(u, i) in self.split(split) {
            lists[i as usize].push(u);
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        lists
    }

    pub fn num_interactions(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    /// 1 - |interactions| / (|U| * |I|), as a fraction.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.num_interactions() as f64 / (self.num_users as f64 * self.num_items as f64)
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x1_0000_0000_01b3);
    }
    h
}

/// Split interactions per user into train/valid/test.
///
/// Each user's interactions are ordered by timestamp when every record has
/// one (stable on ties), otherwise shuffled with a per-user seeded RNG. The
/// earliest portion goes to train; flooring remainders also to go train.
/// Items absent from train are dropped from valid/test and the index space
/// re-densified.
pub fn split_dataset(
    raw: &RawInteractions,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<InteractionDataset> {
    let (r_train, r_valid, r_test) = ratios;
    if r_train < 0.0 || r_valid < 0.0 || r_test < 0.0 {
        return Err(Error::InvalidInput("split ratios must be nonnegative".into()));
    }
    if (r_train + r_valid + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("split ratios must sum to 1".into()));
    }
    let records = dedup_records(&raw.records);
    if records.is_empty() {
        return Err(Error::InvalidInput("no interactions to split".into()));
    }
    let all_timestamped = records.iter().all(|r| r.timestamp.is_some());

    // Group per user, preserving input order within each user.
    let mut per_user: HashMap<&str, Vec<&RawRecord>> = HashMap::new();
    let mut user_order: Vec<&str> = Vec::new();
    for r in &records {
        per_user.entry(r.user.as_str()).or_insert_with(|| {
            user_order.push(r.user.as_str());
            Vec::new()
        });
        per_user.get_mut(r.user.as_str()).unwrap().push(r);
    }

    let mut train_tok: Vec<(&str, &str)> = Vec::new();
    let mut valid_tok: Vec<(&str, &str)> = Vec::new();
    let mut test_tok: Vec<(&str, &str)> = Vec::new();

    for user in &user_order {
        let mut recs = per_user[user].clone();
        if all_timestamped {
            recs.sort_by_key(|r| r.timestamp.unwrap());
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(fnv1a(user)));
            recs.shuffle(&mut rng);
        }
        let n = recs.len();
        let n_valid = (n as f64 * r_valid).floor() as usize;
        let n_test = (n as f64 * r_test).floor() as usize;
        let n_train = n - n_valid - n_test;
        for (pos, r) in recs.iter().enumerate() {
            let pair = (r.user.as_str(), r.item.as_str());
            if pos < n_train {
                train_tok.push(pair);
            } else if pos < n_train + n_valid {
                valid_tok.push(pair);
            } else {
                test_tok.push(pair);
            }
        }
    }

    // Vocabularies over train only; cold items drop out of valid/test.
    let mut user_tokens: Vec<String> = train_tok.iter().map(|(u, _)| u.to_string()).collect();
    user_tokens.sort_unstable();
    user_tokens.dedup();
    let mut item_tokens: Vec<String> = train_tok.iter().map(|(_, i)| i.to_string()).collect();
    item_tokens.sort_unstable();
    item_tokens.dedup();
    let user_vocab = Vocab::from_sorted_tokens(user_tokens);
    let item_vocab = Vocab::from_sorted_tokens(item_tokens);

    let map_pairs = |pairs: &[(&str, &str)]| -> Vec<(u32, u32)> {
        pairs
            .iter()
            .filter_map(|(u, i)| {
                match (user_vocab.index_of(u), item_vocab.index_of(i)) {
                    (Some(ui), Some(ii)) => Some((ui, ii)),
                    _ => None,
                }
            })
            .collect()
    };

    let mut train = map_pairs(&train_tok);
    let mut valid = map_pairs(&valid_tok);
    let mut test = map_pairs(&test_tok);
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();

    Ok(InteractionDataset {
        num_users: user_vocab.len(),
        num_items: item_vocab.len(),
        train,
        valid,
        test,
        user_vocab,
        item_vocab,
        ratios,
        seed,
    })
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    version: u32,
    num_users: usize,
    num_items: usize,
    num_train: usize,
    num_valid: usize,
    num_test: usize,
    ratios: [f64; 3],
    seed: u64,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

fn write_vocab(path: &Path, vocab: &Vocab) -> Result<()> {
    let mut s = String::new();
    for idx in 0..vocab.len() {
        s.push_str(vocab.token(idx as u32));
        s.push('\t');
        s.push_str(&idx.to_string());
        s.push('\n');
    }
    write_file(path, &s)
}

fn write_pairs(path: &Path, pairs: &[(u32, u32)]) -> Result<()> {
    let mut s = String::new();
    for &(u, i) in pairs {
        s.push_str(&format!("{u}\t{i}\n"));
    }
    write_file(path, &s)
}

/// Persist a dataset directory: `meta.json`, `vocab_user.tsv`,
/// `vocab_item.tsv`, `train.tsv`, `valid.tsv`, `test.tsv`.
pub fn save_dataset(ds: &InteractionDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        version: DATASET_VERSION,
        num_users: ds.num_users,
        num_items: ds.num_items,
        num_train: ds.train.len(),
        num_valid: ds.valid.len(),
        num_test: ds.test.len(),
        ratios: [ds.ratios.0, ds.ratios.1, ds.ratios.2],
        seed: ds.seed,
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Corrupted {
            what: "meta.json".into(),
            detail: e.to_string(),
        })?;
    write_file(&dir.join("meta.json"), &meta_json)?;
    write_vocab(&dir.join("vocab_user.tsv"), &ds.user_vocab)?;
    write_vocab(&dir.join("vocab_item.tsv"), &ds.item_vocab)?;
    write_pairs(&dir.join("train.tsv"), &ds.train)?;
    write_pairs(&dir.join("valid.tsv"), &ds.valid)?;
    write_pairs(&dir.join("test.tsv"), &ds.test)?;
    Ok(())
}

fn read_vocab(path: &Path) -> Result<Vocab> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<(String, u32)> = Vec::new();
    for line in text.lines() {
        let mut cols = line.split('\t');
        let (Some(token), Some(idx)) = (cols.next(), cols.next()) else {
            return Err(Error::Corrupted {
                what: path.display().to_string(),
                detail: format!("bad vocab line: {line:?}"),
            });
        };
        let idx: u32 = idx.parse().map_err(|_| Error::Corrupted {
            what: path.display().to_string(),
            detail: format!("bad index in line: {line:?}"),
        })?;
        entries.push((token.to_string(), idx));
    }
    entries.sort_by_key(|(_, i)| *i);
    for (pos, (_, idx)) in entries.iter().enumerate() {
        if *idx as usize != pos {
            return Err(Error::Corrupted {
                what: path.display().to_string(),
                detail: "vocab indices are not dense".into(),
            });
        }
    }
    Ok(Vocab::from_sorted_tokens(
        entries.into_iter().map(|(t, _)| t).collect(),
    ))
}

fn read_pairs(path: &Path, num_users: usize, num_items: usize) -> Result<Vec<(u32, u32)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for line in text.lines() {
        let mut cols = line.split('\t');
        let (Some(u), Some(i)) = (cols.next(), cols.next()) else {
            return Err(Error::Corrupted {
                what: path.display().to_string(),
                detail: format!("bad pair line: {line:?}"),
            });
        };
        let u: u32 = u.parse().map_err(|_| Error::Corrupted {
            what: path.display().to_string(),
            detail: format!("bad user index: {line:?}"),
        })?;
        let i: u32 = i.parse().map_err(|_| Error::Corrupted {
            what: path.display().to_string(),
            detail: format!("bad item index: {line:?}"),
        })?;
        if u as usize >= num_users || i as usize >= num_items {
            return Err(Error::Corrupted {
                what: path.display().to_string(),
                detail: format!("index out of range: {line:?}"),
            });
        }
        pairs.push((u, i));
    }
    Ok(pairs)
}

/// Run the full preparation pipeline: load, k-core filter, split.
pub fn prepare(
    path: &Path,
    format: InputFormat,
    k_core: usize,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<InteractionDataset> {
    let raw = load_interactions(path, format)?;
    let filtered = k_core_filter(raw, k_core, k_core)?;
    split_dataset(&filtered, ratios, seed)
}

/// Load a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<InteractionDataset> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Corrupted {
        what: "meta.json".into(),
        detail: e.to_string(),
    })?;
    if meta.version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            expected: DATASET_VERSION,
            found: meta.version,
        });
    }
    let user_vocab = read_vocab(&dir.join("vocab_user.tsv"))?;
    let item_vocab = read_vocab(&dir.join("vocab_item.tsv"))?;
    if user_vocab.len() != meta.num_users || item_vocab.len() != meta.num_items {
        return Err(Error::Corrupted {
            what: "dataset dir".into(),
            detail: "vocab sizes disagree with meta.json".into(),
        });
    }
    let train = read_pairs(&dir.join("train.tsv"), meta.num_users, meta.num_items)?;
    let valid = read_pairs(&dir.join("valid.tsv"), meta.num_users, meta.num_items)?;
    let test = read_pairs(&dir.join("test.tsv"), meta.num_users, meta.num_items)?;
    if train.len() != meta.num_train || valid.len() != meta.num_valid || test.len() != meta.num_test
    {
        return Err(Error::Corrupted {
            what: "dataset dir".into(),
            detail: "split sizes disagree with meta.json".into(),
        });
    }
    Ok(InteractionDataset {
        num_users: meta.num_users,
        num_items: meta.num_items,
        train,
        valid,
        test,
        user_vocab,
        item_vocab,
        ratios: (meta.ratios[0], meta.ratios[1], meta.ratios[2]),
        seed: meta.seed,
    })
}
