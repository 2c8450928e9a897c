//! Gradient-stop ablations: the loss VALUE is identical across variants at
//! shared parameters (only gradients differ), and short training runs show
//! how disabling alignment or uniformity moves the metrics.
//!
//! ```bash
//! cargo run --release -p cogcl --example ablate_grad_stops
//! ```

use cogcl::config::{AnalysisVariant, TrainConfig};
use cogcl::data::{self, Split};
use cogcl::eval::full_rank_evaluate;
use cogcl::graph::build_base_graph;
use cogcl::synthetic::{clustered_interactions, SynthConfig};
use cogcl::trainer::{self, EVAL_CUTOFFS};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let raw = clustered_interactions(&SynthConfig {
        num_users: 250,
        num_items: 200,
        num_clusters: 6,
        mean_degree: 12.0,
        seed: 8,
        ..Default::default()
    });
    let raw = data::k_core_filter(raw, 5, 5).expect("k-core");
    let ds = data::split_dataset(&raw, (0.8, 0.1, 0.1), 4).expect("split");

    let base_cfg = TrainConfig {
        epochs: 20,
        batch_size: 512,
        embed_dim: 32,
        num_levels: 2,
        codebook_size: 16,
        patience: 20,
        seed: 6,
        ..TrainConfig::default()
    };

    let mut report = |label: &str, cfg: &TrainConfig| {
        let outcome = trainer::train(&ds, cfg, None).expect("training");
        let graph = build_base_graph(&ds);
        let (u, i) =
            trainer::base_view_embeddings(&outcome.store, &graph, cfg.num_layers).unwrap();
        let m = full_rank_evaluate(&u, &i, &ds, Split::Test, &EVAL_CUTOFFS).unwrap();
        println!(
            "{label:<10} first-epoch loss {:.6}  test recall@10 {:.4} ndcg@10 {:.4}",
            outcome.history[0].loss.total,
            m.recall_at(10),
            m.ndcg_at(10)
        );
        outcome.history[0].loss.total
    };

    let reference = report("full", &base_cfg);
    for variant in AnalysisVariant::ALL {
        let mut cfg = base_cfg.clone();
        variant.apply(&mut cfg);
        let first = report(variant.name(), &cfg);
        // Gradient stops change optimization, not values: epoch-0 losses of
        // every variant start from the same parameters and must agree.
        assert!(
            (first - reference).abs() < 1e-9,
            "epoch-0 loss must be identical across variants"
        );
    }
    println!("epoch-0 losses identical across variants (stops affect only gradients)");
}
