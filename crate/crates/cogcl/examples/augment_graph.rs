//! Build the per-epoch pair of virtual-neighbor augmented graphs and show
//! what the operators did to the edge structure.
//!
//! ```bash
//! cargo run --release -p cogcl --example augment_graph
//! ```

use cogcl::data::{self, Split};
use cogcl::graph::{build_augmented_edges, build_augmented_pair, build_base_graph, edges_to_graph, AugmentOp, AugmentationConfig};
use cogcl::quantizer::CodeAssignment;
use cogcl::synthetic::{clustered_interactions, SynthConfig};
use ndarray::Array2;

fn main() {
    let raw = clustered_interactions(&SynthConfig {
        num_users: 100,
        num_items: 80,
        num_clusters: 5,
        mean_degree: 8.0,
        seed: 4,
        ..Default::default()
    });
    let raw = data::k_core_filter(raw, 3, 3).expect("k-core");
    let ds = data::split_dataset(&raw, (0.8, 0.1, 0.1), 2).expect("split");
    let base = build_base_graph(&ds);
    println!(
        "base graph: {} nodes, {} directed nnz",
        base.num_nodes(),
        base.nnz()
    );

    // Toy codes: hash of the entity index per level.
    let h = 4;
    let k = 16;
    let codes = CodeAssignment {
        user_codes: Array2::from_shape_fn((ds.num_users, h), |(e, l)| ((e * 7 + l * 3) % k) as u32),
        item_codes: Array2::from_shape_fn((ds.num_items, h), |(e, l)| ((e * 5 + l * 11) % k) as u32),
        num_levels: h,
        codes_per_level: k,
        epoch: 0,
    };

    for (op, p) in [(AugmentOp::Replace, 0.3), (AugmentOp::Add, 0.2)] {
        let edges = build_augmented_edges(&ds, &codes, p, op, 17);
        let sampled: usize = edges.user_sampled.iter().map(|s| s.len()).sum();
        println!(
            "{} (p={p}): {} interactions kept, {} user->code edges, {} code->item edges ({} user-side samples)",
            op.name(),
            edges.interactions.len(),
            edges.user_to_item_code.len(),
            edges.user_code_to_item.len(),
            sampled,
        );
        let g = edges_to_graph(&ds, &codes, &edges);
        let user_items = ds.user_items(Split::Train);
        let u0_deg = g.degree(0);
        println!(
            "  user 0: |N_u| = {} in base, degree {} after augmentation",
            user_items[0].len(),
            u0_deg
        );
    }

    let cfg = AugmentationConfig { p_replace: 0.3, p_add: 0.2, seed: 99 };
    let pair = build_augmented_pair(&ds, &codes, &cfg, 0).expect("pair");
    println!(
        "epoch pair: operators ({}, {}), nnz {} / {}",
        pair.operators.0.name(),
        pair.operators.1.name(),
        pair.graph1.nnz(),
        pair.graph2.nnz()
    );

    let dump = std::env::temp_dir().join("cogcl_augmented_graph.tsv");
    pair.graph1.dump_edge_list(&dump).expect("dump");
    println!("graph 1 written to {}", dump.display());
}
