//! Generate a synthetic interaction log, run the preparation pipeline
//! (k-core filter, per-user 8:1:1 split, ID mapping) and persist the
//! dataset directory.
//!
//! ```bash
//! cargo run --release -p cogcl --example prepare_dataset -- /tmp/cogcl_demo
//! ```

use std::path::PathBuf;

use cogcl::data::{k_core_filter, save_dataset, split_dataset};
use cogcl::synthetic::{clustered_interactions, save_tsv, SynthConfig};

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "/tmp/cogcl_demo".into())
        .into();
    std::fs::create_dir_all(&out).expect("create output dir");

    let synth = SynthConfig { num_users: 400, num_items: 300, seed: 11, ..Default::default() };
    let raw = clustered_interactions(&synth);
    save_tsv(&raw, &out.join("raw.tsv")).expect("write raw log");
    println!("raw log: {} records", raw.len());

    let filtered = k_core_filter(raw, 5, 5).expect("5-core filtering");
    println!("after 5-core: {} records", filtered.len());

    let ds = split_dataset(&filtered, (0.8, 0.1, 0.1), 42).expect("split");
    println!("#Users        {:>10}", ds.num_users);
    println!("#Items        {:>10}", ds.num_items);
    println!("#Interactions {:>10}", ds.num_interactions());
    println!("Sparsity      {:>9.3}%", ds.sparsity() * 100.0);
    println!(
        "splits: {} train / {} valid / {} test",
        ds.train.len(),
        ds.valid.len(),
        ds.test.len()
    );

    let ds_dir = out.join("dataset");
    save_dataset(&ds, &ds_dir).expect("persist dataset");
    println!("saved to {}", ds_dir.display());
}
