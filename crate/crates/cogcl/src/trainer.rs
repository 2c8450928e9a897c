//! Per-epoch training schedule: code refresh, augmented-graph pair,
//! positive-index rebuild, batched optimization, validation and
//! checkpointing.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::compute::{
    checkpoint_bytes, mix_seed, random_normal_matrix, random_unit_rows, save_checkpoint, Matrix,
    ParameterStore, Tape,
};
use crate::config::{Mode, TrainConfig};
use crate::data::{InteractionDataset, Split};
use crate::encoder::{self, PARAM_CODE_EMBED, PARAM_ID_EMBED};
use crate::error::{Error, Result};
use crate::eval::{self, EarlyStopper, RankingMetrics};
use crate::graph::{build_augmented_pair, build_base_graph, BipartiteGraph};
use crate::objective::{self, LossBreakdown};
use crate::quantizer::{self, codebook_name, Side};

/// Embedding init scale (normal std).
const INIT_STD: f64 = 0.1;
/// Cutoffs evaluated during training.
pub const EVAL_CUTOFFS: [usize; 3] = [5, 10, 20];
/// Max probe pairs for the alignment/uniformity diagnostic.
const PROBE_PAIRS: usize = 256;

/// One epoch's log record.
#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub loss: LossBreakdown,
    pub valid_recall10: f64,
    pub valid_ndcg10: f64,
    pub alignment: f64,
    pub uniformity: f64,
    pub empty_positive_fallbacks: usize,
    pub zero_norm_rows: u64,
    pub max_code_share: f64,
    pub num_batches: usize,
    /// Parameters that never received a nonzero gradient this epoch.
    pub untouched_params: Vec<String>,
}

/// Final state of a training run.
pub struct TrainOutcome {
    /// Parameters of the best validation epoch (initial parameters when no
    /// epoch ran).
    pub store: ParameterStore<f32>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<u64>,
    pub best_valid_ndcg10: f64,
}

/// Initialize all trainable parameters for a dataset and config.
pub fn init_parameters(ds: &InteractionDataset, cfg: &TrainConfig) -> ParameterStore<f32> {
    let d = cfg.embed_dim;
    let mut store = ParameterStore::new();
    store.insert(
        PARAM_ID_EMBED,
        random_normal_matrix(ds.num_users + ds.num_items, d, INIT_STD, mix_seed(cfg.seed, 0x1d)),
    );
    if cfg.mode == Mode::Cogcl {
        let q = cfg.quantizer_config();
        let code_rows = 2 * q.num_levels * q.codebook_size;
        store.insert(
            PARAM_CODE_EMBED,
            random_normal_matrix(code_rows, d, INIT_STD, mix_seed(cfg.seed, 0xce)),
        );
        for (s, side) in [Side::User, Side::Item].into_iter().enumerate() {
            for h in 0..q.num_levels {
                store.insert(
                    &codebook_name(side, h),
                    random_unit_rows(
                        q.codebook_size,
                        q.level_dim(d),
                        mix_seed(cfg.seed, 0xcb00 + (s * 16 + h) as u64),
                    ),
                );
            }
        }
    }
    store
}

/// Eval-mode base-view user and item representation matrices.
pub fn base_view_embeddings(
    store: &ParameterStore<f32>,
    base_graph: &BipartiteGraph,
    num_layers: usize,
) -> Result<(Matrix<f32>, Matrix<f32>)> {
    let z = encoder::encode_eval(base_graph, store.value(PARAM_ID_EMBED), num_layers)?;
    let users = z.slice(ndarray::s![..base_graph.num_users, ..]).to_owned();
    let items = z.slice(ndarray::s![base_graph.num_users.., ..]).to_owned();
    Ok((users, items))
}

fn append_jsonl(path: &Path, value: &impl Serialize) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(value).expect("log record serializes");
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct MetricLine<'a> {
    epoch: u64,
    split: &'a str,
    metric: &'a str,
    n: usize,
    value: f64,
}

fn log_metrics(path: &Path, epoch: u64, split: &str, metrics: &RankingMetrics) -> Result<()> {
    for &n in &metrics.cutoffs {
        append_jsonl(
            path,
            &MetricLine {
                epoch,
                split,
                metric: "recall",
                n,
                value: metrics.recall_at(n),
            },
        )?;
        append_jsonl(
            path,
            &MetricLine {
                epoch,
                split,
                metric: "ndcg",
                n,
                value: metrics.ndcg_at(n),
            },
        )?;
    }
    Ok(())
}

/// Alignment over a sample of valid (user, item) pairs plus uniformity over
/// the sampled users.
fn probe_alignment_uniformity(
    ds: &InteractionDataset,
    users_m: &Matrix<f32>,
    items_m: &Matrix<f32>,
    tau: f64,
) -> (f64, f64) {
    if ds.valid.is_empty() || ds.num_users < 2 {
        return (0.0, 0.0);
    }
    let step = (ds.valid.len() / PROBE_PAIRS).max(1);
    let probe: Vec<(u32, u32)> = ds.valid.iter().step_by(step).take(PROBE_PAIRS).copied().collect();
    let d = users_m.ncols();
    let mut reps = Matrix::<f32>::zeros((2 * probe.len(), d));
    let mut pairs = Vec::with_capacity(probe.len());
    for (k, &(u, i)) in probe.iter().enumerate() {
        reps.row_mut(k).assign(&users_m.row(u as usize));
        reps.row_mut(probe.len() + k).assign(&items_m.row(i as usize));
        pairs.push((k as u32, (probe.len() + k) as u32));
    }
    let alignment = objective::alignment_uniformity(&reps, &pairs, tau)
        .map(|(a, _)| a)
        .unwrap_or(0.0);
    let user_rows = reps.slice(ndarray::s![..probe.len(), ..]).to_owned();
    let uniformity = if probe.len() >= 2 {
        objective::alignment_uniformity(&user_rows, &[], tau)
            .map(|(_, u)| u)
            .unwrap_or(0.0)
    } else {
        0.0
    };
    (alignment, uniformity)
}

/// Run the full training loop. When `run_dir` is given, the effective
/// config, JSON-line logs and `ckpt_best`/`ckpt_last` checkpoints are
/// written there.
pub fn train(
    ds: &InteractionDataset,
    cfg: &TrainConfig,
    run_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.train.is_empty() {
        return Err(Error::InvalidInput("empty training split".into()));
    }
    if let Some(dir) = run_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        std::fs::write(dir.join("config.toml"), cfg.to_toml_string())
            .map_err(|e| Error::io(dir, e))?;
    }

    let enc_cfg = cfg.encoder_config();
    let q_cfg = cfg.quantizer_config();
    let weights = cfg.loss_weights();
    let adam = cfg.adam_params();
    let aug_cfg = cfg.augmentation_config();
    let base_graph = Arc::new(build_base_graph(ds));
    let user_train = ds.user_items(Split::Train);

    let mut store = init_parameters(ds, cfg);
    let mut best_store: Option<ParameterStore<f32>> = None;
    let mut stopper = EarlyStopper::new(cfg.patience.max(1));
    let mut history = Vec::new();
    let mut tape = Tape::<f32>::new();

    let log_path = run_dir.map(|d| d.join("log.jsonl"));
    let metrics_path = run_dir.map(|d| d.join("metrics.jsonl"));

    for epoch in 0..cfg.epochs as u64 {
        // Per-epoch artifacts, frozen across the epoch's batches.
        let (pair, index, max_code_share) = if cfg.mode == Mode::Cogcl {
            let codes = quantizer::refresh_codes(&store, &base_graph, &enc_cfg, &q_cfg, epoch)?;
            let share = codes
                .max_code_share()
                .into_iter()
                .fold(0.0f64, f64::max);
            let pair = build_augmented_pair(ds, &codes, &aug_cfg, epoch)?;
            let index = objective::build_positive_index(
                &codes,
                ds,
                cfg.shared_target_cap,
                mix_seed(cfg.seed, 0x1d00u64.wrapping_add(epoch)),
            );
            (Some(pair), index, share)
        } else {
            (None, objective::PositiveIndex::default(), 0.0)
        };

        let mut order: Vec<usize> = (0..ds.train.len()).collect();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xe000 + epoch));
        order.shuffle(&mut shuffle_rng);
        let mut batch_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xb000 + epoch));

        let mut loss_sum = LossBreakdown::default();
        let mut fallbacks = 0usize;
        let mut num_batches = 0usize;
        let mut touched = vec![false; store.len()];

        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let pairs: Vec<(u32, u32)> = chunk.iter().map(|&k| ds.train[k]).collect();
            let batch = objective::batch_from_pairs(
                &pairs,
                ds.num_items,
                &user_train,
                &index,
                &mut batch_rng,
            );
            fallbacks += batch.empty_positive_fallbacks;

            tape.clear();
            store.zero_grads();
            let view_seed = mix_seed(mix_seed(cfg.seed, 0xf000 + epoch), batch_idx as u64);
            let views = encoder::encode_all_views(
                &mut tape,
                &base_graph,
                pair.as_ref(),
                &store,
                &enc_cfg,
                view_seed,
                true,
            )?;
            let step = (|| -> Result<LossBreakdown> {
                let (total, breakdown) = objective::total_loss(
                    &mut tape, &views, &batch, &store, &weights, &q_cfg, ds.num_users,
                )?;
                tape.backward(total)?;
                tape.flush_grads(&mut store);
                for (k, (_, e)) in store.iter().enumerate() {
                    if !touched[k] && e.grad.iter().any(|&g| g != 0.0) {
                        touched[k] = true;
                    }
                }
                store.adam_step(&adam)?;
                Ok(breakdown)
            })();
            let breakdown = match step {
                Ok(b) => b,
                Err(e) => {
                    // Abort while keeping the last persisted state reachable.
                    if let Some(dir) = run_dir {
                        let _ = save_checkpoint(&store, &dir.join("ckpt_last"));
                    }
                    return Err(e);
                }
            };
            loss_sum.total += breakdown.total;
            loss_sum.bpr += breakdown.bpr;
            loss_sum.code += breakdown.code;
            loss_sum.aug += breakdown.aug;
            loss_sum.sim += breakdown.sim;
            num_batches += 1;
        }
        tape.clear();

        let nb = num_batches.max(1) as f64;
        let loss = LossBreakdown {
            total: loss_sum.total / nb,
            bpr: loss_sum.bpr / nb,
            code: loss_sum.code / nb,
            aug: loss_sum.aug / nb,
            sim: loss_sum.sim / nb,
        };

        let (users_m, items_m) = base_view_embeddings(&store, &base_graph, cfg.num_layers)?;
        let metrics = eval::full_rank_evaluate(&users_m, &items_m, ds, Split::Valid, &EVAL_CUTOFFS)?;
        let (alignment, uniformity) =
            probe_alignment_uniformity(ds, &users_m, &items_m, cfg.tau);

        let untouched_params: Vec<String> = store
            .iter()
            .enumerate()
            .filter(|(k, _)| !touched[*k])
            .map(|(_, (name, _))| name.to_string())
            .collect();
        if !untouched_params.is_empty() {
            log::warn!("epoch {epoch}: no gradient reached {untouched_params:?}");
        }
        let record = EpochRecord {
            epoch,
            loss,
            valid_recall10: metrics.recall_at(10),
            valid_ndcg10: metrics.ndcg_at(10),
            alignment,
            uniformity,
            empty_positive_fallbacks: fallbacks,
            zero_norm_rows: std::mem::take(&mut tape.diagnostics).zero_norm_rows,
            max_code_share,
            num_batches,
            untouched_params,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} (bpr {:.4} code {:.4} aug {:.4} sim {:.4}) valid ndcg@10 {:.4}",
            record.loss.total,
            record.loss.bpr,
            record.loss.code,
            record.loss.aug,
            record.loss.sim,
            record.valid_ndcg10
        );
        if let Some(p) = &log_path {
            append_jsonl(p, &record)?;
        }
        if let Some(p) = &metrics_path {
            log_metrics(p, epoch, "valid", &metrics)?;
        }
        history.push(record);

        let improved = stopper.update(epoch, metrics.ndcg_at(10));
        if improved {
            best_store = Some(store.clone());
            if let Some(dir) = run_dir {
                save_checkpoint(&store, &dir.join("ckpt_best"))?;
            }
        }
        if let Some(dir) = run_dir {
            save_checkpoint(&store, &dir.join("ckpt_last"))?;
        }
        if stopper.should_stop() {
            log::info!("early stop at epoch {epoch}");
            break;
        }
    }

    let (best_epoch, best_valid_ndcg10) = stopper.best().map_or((None, 0.0), |(e, v)| (Some(e), v));
    Ok(TrainOutcome {
        store: best_store.unwrap_or(store),
        history,
        best_epoch,
        best_valid_ndcg10,
    })
}

/// Byte-exact serialized form of a store, for determinism checks.
pub fn checkpoint_fingerprint(store: &ParameterStore<f32>) -> Vec<u8> {
    checkpoint_bytes(store)
}
