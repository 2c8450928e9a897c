//! Full-ranking top-k evaluation, sparsity-group breakdown and best-epoch
//! selection.

use std::collections::BTreeMap;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::compute::{Matrix, Scalar};
use crate::data::{InteractionDataset, Split};
use crate::error::{Error, Result};

/// Per-user metric vectors, kept so users can be regrouped by sparsity.
#[derive(Debug, Clone)]
pub struct UserMetrics {
    pub user: u32,
    pub train_degree: usize,
    /// Recall at each cutoff, aligned with [`RankingMetrics::cutoffs`].
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
}

/// Macro-averaged ranking metrics over all scorable users.
#[derive(Debug, Clone)]
pub struct RankingMetrics {
    pub cutoffs: Vec<usize>,
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub per_user: Vec<UserMetrics>,
}

impl RankingMetrics {
    pub fn recall_at(&self, n: usize) -> f64 {
        self.recall[&n]
    }
    pub fn ndcg_at(&self, n: usize) -> f64 {
        self.ndcg[&n]
    }
}

fn better<S: Scalar>(score_a: S, idx_a: u32, score_b: S, idx_b: u32) -> bool {
    match score_a.partial_cmp(&score_b) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Less) => false,
        _ => idx_a < idx_b,
    }
}

/// Top-`n` item indices by score, ties broken toward the lower index.
fn top_n_items<S: Scalar>(scores: &[(u32, S)], n: usize) -> Vec<u32> {
    // Selection into a fixed-size worst-first buffer; deterministic because
    // the (score, index) order is total.
    let mut top: Vec<(u32, S)> = Vec::with_capacity(n + 1);
    for &(idx, s) in scores {
        if top.len() < n {
            top.push((idx, s));
            top.sort_by(|a, b| {
                if better(a.1, a.0, b.1, b.0) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            });
        } else if let Some(&(worst_idx, worst_s)) = top.last() {
            if better(s, idx, worst_s, worst_idx) {
                top.pop();
                let pos = top
                    .binary_search_by(|&(i, v)| {
                        if better(v, i, s, idx) {
                            std::cmp::Ordering::Less
                        } else {
                            std::cmp::Ordering::Greater
                        }
                    })
                    .unwrap_or_else(|e| e);
                top.insert(pos, (idx, s));
            }
        }
    }
    top.into_iter().map(|(i, _)| i).collect()
}

fn ideal_dcg(hits: usize) -> f64 {
    (0..hits).map(|r| 1.0 / ((r + 2) as f64).log2()).sum()
}

/// Score every item per user by inner product, mask seen items, and compute
/// Recall@N / NDCG@N against the chosen split's targets.
///
/// Train items are always masked; evaluating the test split also masks
/// validation items. Users without targets in the split are skipped.
pub fn full_rank_evaluate<S: Scalar>(
    user_reps: &Matrix<S>,
    item_reps: &Matrix<S>,
    ds: &InteractionDataset,
    split: Split,
    cutoffs: &[usize],
) -> Result<RankingMetrics> {
    if split == Split::Train {
        return Err(Error::InvalidInput(
            "evaluation targets must come from valid or test".into(),
        ));
    }
    if user_reps.nrows() != ds.num_users || item_reps.nrows() != ds.num_items {
        return Err(Error::ShapeMismatch {
            op: "full_rank_evaluate",
            expected: format!("{} users / {} items", ds.num_users, ds.num_items),
            got: format!("{} / {}", user_reps.nrows(), item_reps.nrows()),
        });
    }
    let targets_by_user = ds.user_items(split);
    let train_by_user = ds.user_items(Split::Train);
    let valid_by_user = if split == Split::Test {
        Some(ds.user_items(Split::Valid))
    } else {
        None
    };
    let max_n = cutoffs.iter().copied().max().unwrap_or(0);

    let per_user: Vec<UserMetrics> = (0..ds.num_users as u32)
        .into_par_iter()
        .filter_map(|u| {
            let targets = &targets_by_user[u as usize];
            if targets.is_empty() {
                return None;
            }
            let mut masked: HashSet<u32> = train_by_user[u as usize].iter().copied().collect();
            if let Some(valid) = &valid_by_user {
                masked.extend(valid[u as usize].iter().copied());
            }
            let zu = user_reps.row(u as usize);
            let scores: Vec<(u32, S)> = (0..ds.num_items as u32)
                .filter(|i| !masked.contains(i))
                .map(|i| {
                    let s = item_reps
                        .row(i as usize)
                        .iter()
                        .zip(zu.iter())
                        .fold(S::zero(), |acc, (&a, &b)| acc + a * b);
                    (i, s)
                })
                .collect();
            let top = top_n_items(&scores, max_n);
            let target_set: HashSet<u32> = targets.iter().copied().collect();

            let mut recall = Vec::with_capacity(cutoffs.len());
            let mut ndcg = Vec::with_capacity(cutoffs.len());
            for &n in cutoffs {
                let mut hits = 0usize;
                let mut dcg = 0.0;
                for (rank, item) in top.iter().take(n).enumerate() {
                    if target_set.contains(item) {
                        hits += 1;
                        dcg += 1.0 / ((rank + 2) as f64).log2();
                    }
                }
                recall.push(hits as f64 / targets.len() as f64);
                let idcg = ideal_dcg(n.min(targets.len()));
                ndcg.push(if idcg > 0.0 { dcg / idcg } else { 0.0 });
            }
            Some(UserMetrics {
                user: u,
                train_degree: train_by_user[u as usize].len(),
                recall,
                ndcg,
            })
        })
        .collect();

    let mut recall = BTreeMap::new();
    let mut ndcg = BTreeMap::new();
    let count = per_user.len().max(1) as f64;
    for (pos, &n) in cutoffs.iter().enumerate() {
        recall.insert(n, per_user.iter().map(|m| m.recall[pos]).sum::<f64>() / count);
        ndcg.insert(n, per_user.iter().map(|m| m.ndcg[pos]).sum::<f64>() / count);
    }
    Ok(RankingMetrics {
        cutoffs: cutoffs.to_vec(),
        recall,
        ndcg,
        per_user,
    })
}

/// Macro-averaged metrics of one sparsity group.
#[derive(Debug, Clone)]
pub struct GroupMetrics {
    pub group: usize,
    pub num_users: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
}

/// Split evaluated users into `num_groups` equal-population groups by
/// ascending train degree (populations differ by at most one user) and
/// macro-average per group.
pub fn sparsity_group_report(
    metrics: &RankingMetrics,
    num_groups: usize,
) -> Result<Vec<GroupMetrics>> {
    let n = metrics.per_user.len();
    if n < num_groups {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} users into {num_groups} groups"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&idx| (metrics.per_user[idx].train_degree, metrics.per_user[idx].user));

    let base = n / num_groups;
    let remainder = n % num_groups;
    let mut start = 0usize;
    let mut out = Vec::with_capacity(num_groups);
    for g in 0..num_groups {
        let size = base + usize::from(g < remainder);
        let members = &order[start..start + size];
        start += size;
        let mut recall = BTreeMap::new();
        let mut ndcg = BTreeMap::new();
        for (pos, &cut) in metrics.cutoffs.iter().enumerate() {
            let r = members
                .iter()
                .map(|&idx| metrics.per_user[idx].recall[pos])
                .sum::<f64>()
                / size as f64;
            let d = members
                .iter()
                .map(|&idx| metrics.per_user[idx].ndcg[pos])
                .sum::<f64>()
                / size as f64;
            recall.insert(cut, r);
            ndcg.insert(cut, d);
        }
        out.push(GroupMetrics {
            group: g,
            num_users: size,
            min_degree: members
                .iter()
                .map(|&idx| metrics.per_user[idx].train_degree)
                .min()
                .unwrap_or(0),
            max_degree: members
                .iter()
                .map(|&idx| metrics.per_user[idx].train_degree)
                .max()
                .unwrap_or(0),
            recall,
            ndcg,
        });
    }
    Ok(out)
}

/// Index of the best entry (first maximum) in a per-epoch metric history.
pub fn select_best(history: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in history.iter().enumerate() {
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Patience-based stopper over a validation metric (higher is better).
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best_epoch: Option<u64>,
    best_value: f64,
    epochs_since_best: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best_epoch: None,
            best_value: f64::NEG_INFINITY,
            epochs_since_best: 0,
        }
    }

    /// Record one epoch's value; returns true when it improved the best.
    pub fn update(&mut self, epoch: u64, value: f64) -> bool {
        if value > self.best_value {
            self.best_value = value;
            self.best_epoch = Some(epoch);
            self.epochs_since_best = 0;
            true
        } else {
            self.epochs_since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.epochs_since_best >= self.patience
    }

    pub fn best(&self) -> Option<(u64, f64)> {
        self.best_epoch.map(|e| (e, self.best_value))
    }
}
