//! Train briefly, refresh the discrete codes, and inspect them: example
//! tuples, per-level usage, and how much collaborative structure the codes
//! capture (users sharing >= H-1 levels).
//!
//! ```bash
//! cargo run --release -p cogcl --example quantize_codes
//! ```

use cogcl::config::TrainConfig;
use cogcl::data;
use cogcl::graph::build_base_graph;
use cogcl::objective::build_positive_index;
use cogcl::quantizer::refresh_codes;
use cogcl::synthetic::{clustered_interactions, SynthConfig};
use cogcl::trainer;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let raw = clustered_interactions(&SynthConfig {
        num_users: 300,
        num_items: 240,
        num_clusters: 6,
        mean_degree: 14.0,
        seed: 2,
        ..Default::default()
    });
    let raw = data::k_core_filter(raw, 5, 5).expect("k-core");
    let ds = data::split_dataset(&raw, (0.8, 0.1, 0.1), 1).expect("split");

    let cfg = TrainConfig {
        epochs: 25,
        batch_size: 512,
        embed_dim: 32,
        num_levels: 4,
        codebook_size: 16,
        patience: 25,
        seed: 9,
        ..TrainConfig::default()
    };
    let outcome = trainer::train(&ds, &cfg, None).expect("training");

    let graph = build_base_graph(&ds);
    let codes = refresh_codes(
        &outcome.store,
        &graph,
        &cfg.encoder_config(),
        &cfg.quantizer_config(),
        outcome.history.len() as u64,
    )
    .expect("code refresh");

    println!("example user code tuples:");
    for u in 0..5.min(ds.num_users) {
        let tuple: Vec<u32> = (0..cfg.num_levels).map(|h| codes.user_codes[(u, h)]).collect();
        println!("  user {u}: {tuple:?}");
    }

    println!("max single-code share per (side, level):");
    for (k, share) in codes.max_code_share().iter().enumerate() {
        let side = if k < cfg.num_levels { "user" } else { "item" };
        println!("  {side} level {}: {:.1}%", k % cfg.num_levels, share * 100.0);
    }

    let index = build_positive_index(&codes, &ds, 50, 3);
    let with_code_pos = index
        .user_positives
        .iter()
        .filter(|p| !p.is_empty())
        .count();
    println!(
        "{} of {} users have at least one semantically relevant partner",
        with_code_pos, ds.num_users
    );
}
