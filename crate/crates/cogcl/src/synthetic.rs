//! Synthetic interaction logs with latent cluster structure and long-tail
//! popularity, for the examples and desk-scale experiments.
//!
//! Users carry a primary interest cluster and a lognormal activity level;
//! items carry a cluster and a power-law popularity rank. Most interactions
//! stay inside the user's cluster, the rest explore uniformly, which gives
//! graph models a learnable collaborative signal plus realistic sparsity.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{RawInteractions, RawRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_clusters: usize,
    /// Mean interactions per user (lognormal around this).
    pub mean_degree: f64,
    /// Probability that an interaction stays in the user's cluster.
    pub in_cluster_prob: f64,
    /// Power-law exponent of item popularity within a cluster.
    pub popularity_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_users: 1200,
            num_items: 900,
            num_clusters: 12,
            mean_degree: 22.0,
            in_cluster_prob: 0.75,
            popularity_exponent: 0.8,
            seed: 7,
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generate a clustered interaction log. Timestamps are per-user sequence
/// counters, so chronological splits follow generation order.
pub fn clustered_interactions(cfg: &SynthConfig) -> RawInteractions {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.num_clusters.max(1);

    // Items round-robin over clusters; popularity decays with per-cluster rank.
    let mut cluster_items: Vec<Vec<usize>> = vec![Vec::new(); c];
    for item in 0..cfg.num_items {
        cluster_items[item % c].push(item);
    }
    let cumulative: Vec<Vec<f64>> = cluster_items
        .iter()
        .map(|items| {
            let mut acc = 0.0;
            items
                .iter()
                .enumerate()
                .map(|(rank, _)| {
                    acc += 1.0 / (1.0 + rank as f64).powf(cfg.popularity_exponent);
                    acc
                })
                .collect()
        })
        .collect();

    let draw_item = |rng: &mut ChaCha8Rng, cluster: usize| -> usize {
        let cum = &cumulative[cluster];
        let total = *cum.last().expect("cluster has items");
        let x = rng.random::<f64>() * total;
        let pos = cum.partition_point(|&v| v < x);
        cluster_items[cluster][pos.min(cum.len() - 1)]
    };

    let mut records = Vec::new();
    for user in 0..cfg.num_users {
        let primary = rng.random_range(0..c);
        let degree = (cfg.mean_degree * (0.6 * gauss(&mut rng)).exp())
            .round()
            .clamp(3.0, cfg.mean_degree * 6.0) as usize;
        let mut seen: HashSet<usize> = HashSet::new();
        let mut stamp = 0i64;
        let mut attempts = 0usize;
        while seen.len() < degree && attempts < degree * 20 {
            attempts += 1;
            let cluster = if rng.random::<f64>() < cfg.in_cluster_prob {
                primary
            } else {
                rng.random_range(0..c)
            };
            if cluster_items[cluster].is_empty() {
                continue;
            }
            let item = draw_item(&mut rng, cluster);
            if seen.insert(item) {
                records.push(RawRecord {
                    user: format!("u{user:05}"),
                    item: format!("i{item:05}"),
                    timestamp: Some(stamp),
                });
                stamp += 1;
            }
        }
    }
    RawInteractions {
        records,
        malformed_lines: 0,
    }
}

/// Write a raw log as `user<TAB>item<TAB>timestamp` lines.
pub fn save_tsv(raw: &RawInteractions, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    for r in &raw.records {
        match r.timestamp {
            Some(ts) => writeln!(f, "{}\t{}\t{}", r.user, r.item, ts),
            None => writeln!(f, "{}\t{}", r.user, r.item),
        }
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
