//! Train the full model and the plain-BPR baseline on a synthetic clustered
//! dataset and compare test Recall@10 / NDCG@10 over several seeds.
//!
//! ```bash
//! cargo run --release -p cogcl --example desk_benchmark
//! ```
//!
//! Knobs can be overridden via environment variables (SEEDS, EPOCHS, USERS,
//! ITEMS, DEGREE, BATCH, MU, ETA, LAMBDA, PR, PA, K, LR, DROPOUT, PATIENCE)
//! for quick sweeps.

use cogcl::config::{Mode, TrainConfig};
use cogcl::data::{self, Split};
use cogcl::eval::full_rank_evaluate;
use cogcl::graph::build_base_graph;
use cogcl::synthetic::{clustered_interactions, SynthConfig};
use cogcl::trainer::{self, EVAL_CUTOFFS};

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let seeds: u64 = env_or("SEEDS", 3);
    let synth = SynthConfig {
        num_users: env_or("USERS", 900),
        num_items: env_or("ITEMS", 700),
        num_clusters: env_or("CLUSTERS", 12),
        mean_degree: env_or("DEGREE", 18.0),
        in_cluster_prob: env_or("INCLUSTER", 0.75),
        popularity_exponent: 0.8,
        seed: 1234,
    };
    let raw = clustered_interactions(&synth);
    let raw = data::k_core_filter(raw, 5, 5).expect("k-core");
    let ds = data::split_dataset(&raw, (0.8, 0.1, 0.1), 7).expect("split");
    println!(
        "dataset: {} users, {} items, {} train / {} valid / {} test",
        ds.num_users,
        ds.num_items,
        ds.train.len(),
        ds.valid.len(),
        ds.test.len()
    );

    let base_cfg = TrainConfig {
        epochs: env_or("EPOCHS", 120),
        batch_size: env_or("BATCH", 512),
        embed_dim: 64,
        num_layers: 3,
        num_levels: 4,
        codebook_size: env_or("K", 32),
        lambda: env_or("LAMBDA", 1.0),
        mu: env_or("MU", 0.1),
        eta: env_or("ETA", 0.02),
        p_replace: env_or("PR", 0.3),
        p_add: env_or("PA", 0.2),
        dropout_rate: env_or("DROPOUT", 0.1),
        lr: env_or("LR", 1e-3),
        patience: env_or("PATIENCE", 15),
        ..TrainConfig::default()
    };

    let mut rel_gains = Vec::new();
    for seed in 0..seeds {
        let mut results = Vec::new();
        for mode in [Mode::LightgcnBaseline, Mode::Cogcl] {
            let cfg = TrainConfig { mode, seed: 100 + seed, ..base_cfg.clone() };
            let t0 = std::time::Instant::now();
            let outcome = trainer::train(&ds, &cfg, None).expect("training");
            let graph = build_base_graph(&ds);
            let (u, i) = trainer::base_view_embeddings(&outcome.store, &graph, cfg.num_layers)
                .expect("embeddings");
            let m = full_rank_evaluate(&u, &i, &ds, Split::Test, &EVAL_CUTOFFS).expect("eval");
            println!(
                "seed {seed} {:?}: epochs {} (best {:?}), test recall@10 {:.4} ndcg@10 {:.4} [{:.1}s]",
                mode,
                outcome.history.len(),
                outcome.best_epoch,
                m.recall_at(10),
                m.ndcg_at(10),
                t0.elapsed().as_secs_f64()
            );
            results.push(m.recall_at(10));
        }
        let gain = (results[1] - results[0]) / results[0];
        println!("seed {seed}: relative recall@10 gain {:+.2}%", gain * 100.0);
        rel_gains.push(gain);
    }
    let mean_gain = rel_gains.iter().sum::<f64>() / rel_gains.len() as f64;
    println!("mean relative gain over {seeds} seeds: {:+.2}%", mean_gain * 100.0);
}
