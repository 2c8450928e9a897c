//! # cogcl
//!
//! A from-scratch collaborative-filtering training engine built around
//! discrete-code graph contrastive learning:
//!
//! - LightGCN-style propagation over the user-item bipartite graph with
//!   per-layer input dropout ([`encoder`]).
//! - End-to-end multi-level vector quantization (residual or product) that
//!   maps user/item representations to tuples of discrete codes
//!   ([`quantizer`]).
//! - Virtual-neighbor graph augmentation that expands observed interactions
//!   into edges touching code nodes ([`graph`]).
//! - Semantic-relevance positive sampling from shared codes and shared
//!   interaction targets, plus triple-view InfoNCE objectives with
//!   gradient-stop ablation switches ([`objective`]).
//! - Full-ranking Recall@N / NDCG@N evaluation with sparsity-group breakdown
//!   ([`eval`]).
//!
//! Everything runs on a small manual reverse-mode differentiation tape
//! ([`compute`]); no external ML framework is involved.
//!
//! ## Quick start
//!
//! ```no_run
//! use cogcl::config::TrainConfig;
//! use cogcl::synthetic;
//! use cogcl::{data, trainer};
//!
//! let raw = synthetic::clustered_interactions(&synthetic::SynthConfig::default());
//! let raw = data::k_core_filter(raw, 5, 5).unwrap();
//! let ds = data::split_dataset(&raw, (0.8, 0.1, 0.1), 42).unwrap();
//! let cfg = TrainConfig::default();
//! let outcome = trainer::train(&ds, &cfg, None).unwrap();
//! println!("best valid NDCG@10: {:.4}", outcome.best_valid_ndcg10);
//! ```
//!
//! The `cogcl` binary wraps the same pipeline behind `prepare`, `train`,
//! `evaluate`, `analyze` and export subcommands; see the examples/ directory
//! for library-level entry points per capability.

pub mod compute;
pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod objective;
pub mod quantizer;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
