//! End-to-end training on a small synthetic dataset, followed by
//! full-ranking test evaluation and the sparsity-group breakdown.
//!
//! ```bash
//! cargo run --release -p cogcl --example train_and_evaluate
//! ```

use cogcl::config::TrainConfig;
use cogcl::data::{self, Split};
use cogcl::eval::{full_rank_evaluate, sparsity_group_report};
use cogcl::graph::build_base_graph;
use cogcl::synthetic::{clustered_interactions, SynthConfig};
use cogcl::trainer::{self, EVAL_CUTOFFS};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let raw = clustered_interactions(&SynthConfig {
        num_users: 300,
        num_items: 240,
        num_clusters: 8,
        mean_degree: 14.0,
        seed: 3,
        ..Default::default()
    });
    let raw = data::k_core_filter(raw, 5, 5).expect("k-core");
    let ds = data::split_dataset(&raw, (0.8, 0.1, 0.1), 42).expect("split");
    println!(
        "dataset: {} users x {} items, {} train pairs",
        ds.num_users,
        ds.num_items,
        ds.train.len()
    );

    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 512,
        embed_dim: 32,
        num_levels: 2,
        codebook_size: 16,
        patience: 10,
        seed: 7,
        ..TrainConfig::default()
    };
    let outcome = trainer::train(&ds, &cfg, None).expect("training");
    println!(
        "trained {} epochs, best epoch {:?} (valid NDCG@10 {:.4})",
        outcome.history.len(),
        outcome.best_epoch,
        outcome.best_valid_ndcg10
    );

    let graph = build_base_graph(&ds);
    let (users_m, items_m) =
        trainer::base_view_embeddings(&outcome.store, &graph, cfg.num_layers).expect("embeddings");
    let metrics = full_rank_evaluate(&users_m, &items_m, &ds, Split::Test, &EVAL_CUTOFFS)
        .expect("evaluation");
    for &n in &metrics.cutoffs {
        println!(
            "test recall@{n} = {:.4}   ndcg@{n} = {:.4}",
            metrics.recall_at(n),
            metrics.ndcg_at(n)
        );
    }

    println!("sparsity groups (ascending train degree):");
    for g in sparsity_group_report(&metrics, 5).expect("grouping") {
        println!(
            "  group {} ({} users, degree {}..{}): recall@10 {:.4} ndcg@10 {:.4}",
            g.group, g.num_users, g.min_degree, g.max_degree, g.recall[&10], g.ndcg[&10]
        );
    }
}
