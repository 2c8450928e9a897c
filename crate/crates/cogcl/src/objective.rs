//! Positive sampling, BPR, triple-view contrastive losses and the combined
//! objective.
//!
//! Semantically relevant positives come from two relations, rebuilt per
//! epoch: sharing at least H-1 code levels (level-wise match) and sharing an
//! interacted target in train. Contrastive alignment runs bidirectionally
//! between the two augmented views (`l_aug`) and from each augmented view to
//! the base-view representation of the sampled positive (`l_sim`), both with
//! in-batch pools.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compute::{
    cosine_sim_matrix, GradStop, Matrix, NodeId, ParameterStore, Scalar, Tape,
};
use crate::data::{InteractionDataset, Split};
use crate::encoder::ViewRepresentations;
use crate::error::{Error, Result};
use crate::quantizer::{self, CodeAssignment, QuantizerConfig, Side};

/// Per-entity semantically relevant partners for one epoch.
#[derive(Debug, Clone, Default)]
pub struct PositiveIndex {
    pub user_positives: Vec<Vec<u32>>,
    pub item_positives: Vec<Vec<u32>>,
}

/// Candidate-collection bound before sampling down to the cap; keeps index
/// construction linear even when codebooks collapse.
const CANDIDATE_FACTOR: usize = 8;

fn sample_down(candidates: &mut Vec<u32>, cap: usize, rng: &mut ChaCha8Rng) {
    if candidates.len() <= cap {
        return;
    }
    // Partial Fisher-Yates: the first `cap` slots become the sample.
    for i in 0..cap {
        let j = rng.random_range(i..candidates.len());
        candidates.swap(i, j);
    }
    candidates.truncate(cap);
    candidates.sort_unstable();
}

/// Positives of one side: entities sharing >= H-1 code levels, plus entities
/// sharing an interacted target, the latter capped per entity.
fn side_positives(
    codes: &ndarray::Array2<u32>,
    own_lists: &[Vec<u32>],
    other_lists: &[Vec<u32>],
    cap: usize,
    seed: u64,
) -> Vec<Vec<u32>> {
    let n = codes.nrows();
    let h_levels = codes.ncols();
    let budget = cap.saturating_mul(CANDIDATE_FACTOR).max(cap);

    // Hash buckets over the (H choose H-1) masked code tuples.
    let mut buckets: HashMap<(usize, Vec<u32>), Vec<u32>> = HashMap::new();
    for e in 0..n {
        for omit in 0..h_levels {
            let key: Vec<u32> = (0..h_levels)
                .filter(|&h| h != omit)
                .map(|h| codes[(e, h)])
                .collect();
            buckets.entry((omit, key)).or_default().push(e as u32);
        }
    }

    let mut positives: Vec<Vec<u32>> = Vec::with_capacity(n);
    for e in 0..n as u32 {
        let mut seen = std::collections::HashSet::new();
        let mut cands: Vec<u32>;

        // Shared codes, capped like shared targets to bound degenerate buckets.
        let mut code_cands: Vec<u32> = Vec::new();
        'code: for omit in 0..h_levels {
            let key: Vec<u32> = (0..h_levels)
                .filter(|&h| h != omit)
                .map(|h| codes[(e as usize, h)])
                .collect();
            for &v in &buckets[&(omit, key)] {
                if v != e && seen.insert(v) {
                    code_cands.push(v);
                    if code_cands.len() >= budget {
                        break 'code;
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(crate::compute::mix_seed(seed, e as u64));
        sample_down(&mut code_cands, cap, &mut rng);
        cands = code_cands;

        // Shared interaction targets.
        let mut target_cands: Vec<u32> = Vec::new();
        let mut seen_t = std::collections::HashSet::new();
        'target: for &t in &own_lists[e as usize] {
            for &v in &other_lists[t as usize] {
                if v != e && seen_t.insert(v) {
                    target_cands.push(v);
                    if target_cands.len() >= budget {
                        break 'target;
                    }
                }
            }
        }
        sample_down(&mut target_cands, cap, &mut rng);
        cands.extend_from_slice(&target_cands);
        cands.sort_unstable();
        cands.dedup();
        positives.push(cands);
    }
    positives
}

/// Build the epoch's positive index from fresh codes and train interactions.
pub fn build_positive_index(
    codes: &CodeAssignment,
    ds: &InteractionDataset,
    cap: usize,
    seed: u64,
) -> PositiveIndex {
    let user_items = ds.user_items(Split::Train);
    let item_users = ds.item_users(Split::Train);
    PositiveIndex {
        user_positives: side_positives(&codes.user_codes, &user_items, &item_users, cap, seed),
        item_positives: side_positives(
            &codes.item_codes,
            &item_users,
            &user_items,
            cap,
            crate::compute::mix_seed(seed, 0x17),
        ),
    }
}

/// One optimization batch.
#[derive(Debug, Clone, Default)]
pub struct TrainBatch {
    pub users: Vec<u32>,
    pub pos_items: Vec<u32>,
    pub neg_items: Vec<u32>,
    /// Sampled semantically relevant user per batch user (self on fallback).
    pub pos_users: Vec<u32>,
    /// Sampled semantically relevant item per batch positive item.
    pub pos_item_partners: Vec<u32>,
    /// How many u+/i+ fell back to the anchor itself (empty positives).
    pub empty_positive_fallbacks: usize,
}

impl TrainBatch {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// Fill a batch from given train pairs: one rejection-sampled negative item
/// per pair plus one positive partner per user and per item.
pub fn batch_from_pairs(
    pairs: &[(u32, u32)],
    num_items: usize,
    user_train: &[Vec<u32>],
    index: &PositiveIndex,
    rng: &mut ChaCha8Rng,
) -> TrainBatch {
    let mut batch = TrainBatch::default();
    for &(u, i) in pairs {
        batch.users.push(u);
        batch.pos_items.push(i);
        let items_of_u = &user_train[u as usize];
        let neg = if items_of_u.len() >= num_items {
            // Degenerate: the user interacted with everything.
            rng.random_range(0..num_items as u32)
        } else {
            loop {
                let cand = rng.random_range(0..num_items as u32);
                if items_of_u.binary_search(&cand).is_err() {
                    break cand;
                }
            }
        };
        batch.neg_items.push(neg);
    }
    // An index without entries (baseline mode) degenerates to self-pairs.
    for &u in &batch.users {
        match index.user_positives.get(u as usize) {
            Some(pos) if !pos.is_empty() => {
                batch.pos_users.push(pos[rng.random_range(0..pos.len())]);
            }
            Some(_) => {
                batch.empty_positive_fallbacks += 1;
                batch.pos_users.push(u);
            }
            None => batch.pos_users.push(u),
        }
    }
    for &i in &batch.pos_items {
        match index.item_positives.get(i as usize) {
            Some(pos) if !pos.is_empty() => {
                batch.pos_item_partners.push(pos[rng.random_range(0..pos.len())]);
            }
            Some(_) => {
                batch.empty_positive_fallbacks += 1;
                batch.pos_item_partners.push(i);
            }
            None => batch.pos_item_partners.push(i),
        }
    }
    batch
}

/// Uniformly sample `batch_size` train pairs (with replacement) and fill the
/// batch.
pub fn sample_batch(
    ds: &InteractionDataset,
    index: &PositiveIndex,
    batch_size: usize,
    seed: u64,
) -> TrainBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(u32, u32)> = (0..batch_size)
        .map(|_| ds.train[rng.random_range(0..ds.train.len())])
        .collect();
    let user_train = ds.user_items(Split::Train);
    batch_from_pairs(&pairs, ds.num_items, &user_train, index, &mut rng)
}

/// Loss weights and gradient-stop switches of the combined objective.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    /// Code-loss weight (lambda).
    pub lambda: f64,
    /// Augmented-view alignment weight (mu).
    pub mu: f64,
    /// Semantic alignment weight (eta).
    pub eta: f64,
    pub aug_stop: GradStop,
    pub sim_stop: GradStop,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda: 1.0,
            mu: 0.1,
            eta: 0.02,
            aug_stop: GradStop::None,
            sim_stop: GradStop::None,
        }
    }
}

fn item_rows(items: &[u32], num_users: usize) -> Vec<u32> {
    items.iter().map(|&i| num_users as u32 + i).collect()
}

/// BPR over base-view representations: mean `-log sigmoid(u.i+ - u.i-)`.
pub fn bpr_loss<S: Scalar>(
    tape: &mut Tape<S>,
    views: &ViewRepresentations,
    batch: &TrainBatch,
    num_users: usize,
) -> Result<NodeId> {
    let u = tape.gather_rows(views.base, &batch.users);
    let pos = tape.gather_rows(views.base, &item_rows(&batch.pos_items, num_users));
    let neg = tape.gather_rows(views.base, &item_rows(&batch.neg_items, num_users));
    let s_pos = tape.row_dot(u, pos)?;
    let s_neg = tape.row_dot(u, neg)?;
    tape.bpr_from_scores(s_pos, s_neg)
}

/// InfoNCE with an explicit positive per anchor and a shared negative pool:
/// mean over anchors of `-log( e^{s(a,p)/tau} / (e^{s(a,p)/tau} +
/// sum_q e^{s(a,q)/tau}) )`.
pub fn info_nce<S: Scalar>(
    tape: &mut Tape<S>,
    anchor: NodeId,
    positive: NodeId,
    negatives_pool: NodeId,
    tau: f64,
    stop: GradStop,
) -> Result<NodeId> {
    let sim_ap = tape.cosine_sim(anchor, positive)?;
    let pos = tape.diag_to_col(sim_ap)?;
    let pool = tape.cosine_sim(anchor, negatives_pool)?;
    tape.info_nce_rows(pos, pool, false, tau, stop)
}

/// In-batch InfoNCE where the positive of anchor `i` is pool row `i`.
fn in_batch_nce<S: Scalar>(
    tape: &mut Tape<S>,
    anchors: NodeId,
    pool: NodeId,
    tau: f64,
    stop: GradStop,
) -> Result<NodeId> {
    let sims = tape.cosine_sim(anchors, pool)?;
    let pos = tape.diag_to_col(sims)?;
    tape.info_nce_rows(pos, sims, true, tau, stop)
}

/// Bidirectional alignment between the two augmented views with in-batch
/// negatives, user side plus item side.
pub fn l_aug<S: Scalar>(
    tape: &mut Tape<S>,
    views: &ViewRepresentations,
    batch: &TrainBatch,
    num_users: usize,
    tau: f64,
    stop: GradStop,
) -> Result<NodeId> {
    let mut terms = Vec::with_capacity(4);
    let item_idx = item_rows(&batch.pos_items, num_users);
    for rows in [&batch.users, &item_idx] {
        let v1 = tape.gather_rows(views.aug1(), rows);
        let v2 = tape.gather_rows(views.aug2(), rows);
        let sims = tape.cosine_sim(v1, v2)?;
        let pos = tape.diag_to_col(sims)?;
        terms.push(tape.info_nce_rows(pos, sims, true, tau, stop)?);
        let sims_t = tape.transpose(sims);
        terms.push(tape.info_nce_rows(pos, sims_t, true, tau, stop)?);
    }
    let one = S::one();
    let weighted: Vec<(NodeId, S)> = terms.into_iter().map(|t| (t, one)).collect();
    Ok(tape.add_scaled(&weighted))
}

/// Alignment of each augmented view with the base-view representation of
/// the sampled semantically relevant partner, pooled over the batch's
/// sampled positives.
pub fn l_sim<S: Scalar>(
    tape: &mut Tape<S>,
    views: &ViewRepresentations,
    batch: &TrainBatch,
    num_users: usize,
    tau: f64,
    stop: GradStop,
) -> Result<NodeId> {
    let mut terms = Vec::with_capacity(4);
    let user_partners = tape.gather_rows(views.base, &batch.pos_users);
    let item_partners =
        tape.gather_rows(views.base, &item_rows(&batch.pos_item_partners, num_users));
    let item_idx = item_rows(&batch.pos_items, num_users);
    for (rows, partners) in [(&batch.users, user_partners), (&item_idx, item_partners)] {
        for aug in [views.aug1(), views.aug2()] {
            let anchors = tape.gather_rows(aug, rows);
            terms.push(in_batch_nce(tape, anchors, partners, tau, stop)?);
        }
    }
    let one = S::one();
    let weighted: Vec<(NodeId, S)> = terms.into_iter().map(|t| (t, one)).collect();
    Ok(tape.add_scaled(&weighted))
}

/// Component values of one combined-loss evaluation, for logging.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub bpr: f64,
    pub code: f64,
    pub aug: f64,
    pub sim: f64,
}

/// The combined objective `L = L_bpr + lambda L_code + mu L_aug + eta
/// L_sim`. Components with zero weight are skipped entirely, so the
/// all-zeros setting is exactly plain BPR.
pub fn total_loss<S: Scalar>(
    tape: &mut Tape<S>,
    views: &ViewRepresentations,
    batch: &TrainBatch,
    store: &ParameterStore<S>,
    weights: &LossWeights,
    q_cfg: &QuantizerConfig,
    num_users: usize,
) -> Result<(NodeId, LossBreakdown)> {
    let mut breakdown = LossBreakdown::default();
    let bpr = bpr_loss(tape, views, batch, num_users)?;
    breakdown.bpr = tape.scalar_value(bpr).as_f64();
    let mut terms: Vec<(NodeId, S)> = vec![(bpr, S::one())];

    if weights.lambda != 0.0 {
        let user_reps = tape.gather_rows(views.base, &batch.users);
        let (code_u, _) = quantizer::code_loss(tape, user_reps, store, Side::User, q_cfg)?;
        let item_reps = tape.gather_rows(views.base, &item_rows(&batch.pos_items, num_users));
        let (code_i, _) = quantizer::code_loss(tape, item_reps, store, Side::Item, q_cfg)?;
        breakdown.code = (tape.scalar_value(code_u) + tape.scalar_value(code_i)).as_f64();
        let w = S::from_f64(weights.lambda);
        terms.push((code_u, w));
        terms.push((code_i, w));
    }
    if weights.mu != 0.0 {
        let aug = l_aug(tape, views, batch, num_users, q_cfg.tau, weights.aug_stop)?;
        breakdown.aug = tape.scalar_value(aug).as_f64();
        terms.push((aug, S::from_f64(weights.mu)));
    }
    if weights.eta != 0.0 {
        let sim = l_sim(tape, views, batch, num_users, q_cfg.tau, weights.sim_stop)?;
        breakdown.sim = tape.scalar_value(sim).as_f64();
        terms.push((sim, S::from_f64(weights.eta)));
    }

    let total = tape.add_scaled(&terms);
    breakdown.total = tape.scalar_value(total).as_f64();
    if !breakdown.total.is_finite() {
        return Err(Error::NonFiniteLoss {
            breakdown: format!(
                "bpr={} code={} aug={} sim={}",
                breakdown.bpr, breakdown.code, breakdown.aug, breakdown.sim
            ),
        });
    }
    Ok((total, breakdown))
}

/// Alignment / uniformity diagnostic over a representation sample.
///
/// Alignment is `-(1/tau) * mean s(z, z+)` over the given positive pairs;
/// uniformity is `mean_i log mean_{j != i} e^{s(z_i, z_j)/tau}` over the
/// sample. Diagnostic only; no gradients.
pub fn alignment_uniformity<S: Scalar>(
    reps: &Matrix<S>,
    positive_pairs: &[(u32, u32)],
    tau: f64,
) -> Result<(f64, f64)> {
    let n = reps.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(
            "uniformity needs at least two representations".into(),
        ));
    }
    let (sims, _) = cosine_sim_matrix(reps, reps)?;
    let mut align = 0.0;
    if !positive_pairs.is_empty() {
        for &(a, b) in positive_pairs {
            align += sims[(a as usize, b as usize)].as_f64();
        }
        align = -align / (tau * positive_pairs.len() as f64);
    }
    let mut unif = 0.0;
    for i in 0..n {
        // Log-mean-exp over others, shifted for stability.
        let mut max_z = f64::NEG_INFINITY;
        for j in 0..n {
            if j != i {
                max_z = max_z.max(sims[(i, j)].as_f64() / tau);
            }
        }
        let mut acc = 0.0;
        for j in 0..n {
            if j != i {
                acc += (sims[(i, j)].as_f64() / tau - max_z).exp();
            }
        }
        unif += max_z + (acc / (n - 1) as f64).ln();
    }
    Ok((align, unif / n as f64))
}
