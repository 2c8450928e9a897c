//! Alignment/uniformity diagnostics: compare random embeddings against
//! trained ones on held-out positive pairs.
//!
//! ```bash
//! cargo run --release -p cogcl --example alignment_uniformity
//! ```

use cogcl::compute::{random_normal_matrix, Matrix};
use cogcl::config::{Mode, TrainConfig};
use cogcl::data;
use cogcl::graph::build_base_graph;
use cogcl::objective::alignment_uniformity;
use cogcl::synthetic::{clustered_interactions, SynthConfig};
use cogcl::trainer;

/// Probe matrix: rows are users then items of the sampled valid pairs.
fn probe(
    ds: &cogcl::data::InteractionDataset,
    users_m: &Matrix<f32>,
    items_m: &Matrix<f32>,
    max_pairs: usize,
) -> (Matrix<f32>, Vec<(u32, u32)>) {
    let pairs: Vec<(u32, u32)> = ds.valid.iter().take(max_pairs).copied().collect();
    let d = users_m.ncols();
    let mut reps = Matrix::<f32>::zeros((2 * pairs.len(), d));
    let mut index_pairs = Vec::with_capacity(pairs.len());
    for (k, &(u, i)) in pairs.iter().enumerate() {
        reps.row_mut(k).assign(&users_m.row(u as usize));
        reps.row_mut(pairs.len() + k).assign(&items_m.row(i as usize));
        index_pairs.push((k as u32, (pairs.len() + k) as u32));
    }
    (reps, index_pairs)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let raw = clustered_interactions(&SynthConfig {
        num_users: 250,
        num_items: 200,
        num_clusters: 6,
        mean_degree: 12.0,
        seed: 5,
        ..Default::default()
    });
    let raw = data::k_core_filter(raw, 5, 5).expect("k-core");
    let ds = data::split_dataset(&raw, (0.8, 0.1, 0.1), 1).expect("split");
    let tau = 0.2;

    // Untrained reference point.
    let users0 = random_normal_matrix::<f32>(ds.num_users, 32, 0.1, 1);
    let items0 = random_normal_matrix::<f32>(ds.num_items, 32, 0.1, 2);
    let (reps, pairs) = probe(&ds, &users0, &items0, 200);
    let (a, u) = alignment_uniformity(&reps, &pairs, tau).expect("diagnostic");
    println!("random init:  alignment {a:+.3}  uniformity {u:+.3}");

    for (label, mode) in [("plain BPR", Mode::LightgcnBaseline), ("full model", Mode::Cogcl)] {
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 512,
            embed_dim: 32,
            num_levels: 2,
            codebook_size: 16,
            patience: 30,
            mode,
            seed: 3,
            ..TrainConfig::default()
        };
        let outcome = trainer::train(&ds, &cfg, None).expect("training");
        let graph = build_base_graph(&ds);
        let (users_m, items_m) =
            trainer::base_view_embeddings(&outcome.store, &graph, cfg.num_layers).unwrap();
        let (reps, pairs) = probe(&ds, &users_m, &items_m, 200);
        let (a, u) = alignment_uniformity(&reps, &pairs, tau).expect("diagnostic");
        println!("{label}:  alignment {a:+.3}  uniformity {u:+.3}");
    }
    println!("(lower alignment = tighter positive pairs; lower uniformity = more spread)");
}
