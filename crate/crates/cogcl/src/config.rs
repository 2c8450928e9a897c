//! Run configuration: a TOML file mirrored by CLI flags, flags winning.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compute::{AdamParams, GradStop};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::graph::AugmentationConfig;
use crate::objective::LossWeights;
use crate::quantizer::{QuantScheme, QuantizerConfig};

/// Training mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Full objective: BPR + code loss + triple-view contrastive learning.
    #[default]
    Cogcl,
    /// Plain BPR over the base graph (lambda = mu = eta = 0, no codes,
    /// no augmentation, no positive index).
    LightgcnBaseline,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cogcl" => Ok(Mode::Cogcl),
            "lightgcn_baseline" => Ok(Mode::LightgcnBaseline),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// All training knobs. Unknown keys in a config file are rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    /// Code levels H.
    pub num_levels: usize,
    /// Codebook size K.
    pub codebook_size: usize,
    pub scheme: QuantScheme,
    /// Shared softmax temperature for quantization and contrastive losses.
    pub tau: f64,
    /// Code-loss weight.
    pub lambda: f64,
    /// Augmented-view alignment weight.
    pub mu: f64,
    /// Semantic alignment weight.
    pub eta: f64,
    pub p_replace: f64,
    pub p_add: f64,
    pub dropout_rate: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub seed: u64,
    pub mode: Mode,
    pub aug_grad_stop: GradStop,
    pub sim_grad_stop: GradStop,
    /// Cap on sampled positives per entity in the positive index.
    pub shared_target_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 4096,
            embed_dim: 64,
            num_layers: 3,
            num_levels: 4,
            codebook_size: 256,
            scheme: QuantScheme::Rq,
            tau: 0.2,
            lambda: 1.0,
            mu: 0.1,
            eta: 0.02,
            p_replace: 0.3,
            p_add: 0.2,
            dropout_rate: 0.1,
            lr: 1e-3,
            weight_decay: 1e-6,
            patience: 20,
            seed: 42,
            mode: Mode::Cogcl,
            aug_grad_stop: GradStop::None,
            sim_grad_stop: GradStop::None,
            shared_target_cap: 50,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder_config().validate()?;
        self.quantizer_config().validate(self.embed_dim)?;
        self.augmentation_config().validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("lr must be positive".into()));
        }
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu), ("eta", self.eta)] {
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            num_layers: self.num_layers,
            embed_dim: self.embed_dim,
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn quantizer_config(&self) -> QuantizerConfig {
        QuantizerConfig {
            scheme: self.scheme,
            num_levels: self.num_levels,
            codebook_size: self.codebook_size,
            tau: self.tau,
        }
    }

    pub fn augmentation_config(&self) -> AugmentationConfig {
        AugmentationConfig {
            p_replace: self.p_replace,
            p_add: self.p_add,
            seed: crate::compute::mix_seed(self.seed, 0x5eed_0a06),
        }
    }

    /// Effective loss weights; baseline mode zeroes every auxiliary term.
    pub fn loss_weights(&self) -> LossWeights {
        match self.mode {
            Mode::Cogcl => LossWeights {
                lambda: self.lambda,
                mu: self.mu,
                eta: self.eta,
                aug_stop: self.aug_grad_stop,
                sim_stop: self.sim_grad_stop,
            },
            Mode::LightgcnBaseline => LossWeights {
                lambda: 0.0,
                mu: 0.0,
                eta: 0.0,
                aug_stop: GradStop::None,
                sim_stop: GradStop::None,
            },
        }
    }

    pub fn adam_params(&self) -> AdamParams {
        AdamParams {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamParams::default()
        }
    }
}

/// Gradient-stop ablation variants: disable alignment (A) or uniformity (U)
/// in both contrastive losses, or in only the augmented-view loss (A*) or
/// only the semantic loss (S*).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisVariant {
    WoA,
    WoU,
    WoAA,
    WoAU,
    WoSA,
    WoSU,
}

impl AnalysisVariant {
    pub const ALL: [AnalysisVariant; 6] = [
        AnalysisVariant::WoA,
        AnalysisVariant::WoU,
        AnalysisVariant::WoAA,
        AnalysisVariant::WoAU,
        AnalysisVariant::WoSA,
        AnalysisVariant::WoSU,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalysisVariant::WoA => "wo_A",
            AnalysisVariant::WoU => "wo_U",
            AnalysisVariant::WoAA => "wo_AA",
            AnalysisVariant::WoAU => "wo_AU",
            AnalysisVariant::WoSA => "wo_SA",
            AnalysisVariant::WoSU => "wo_SU",
        }
    }

    /// Set the corresponding gradient-stop switches.
    pub fn apply(self, cfg: &mut TrainConfig) {
        let (aug, sim) = match self {
            AnalysisVariant::WoA => (GradStop::NoAlignment, GradStop::NoAlignment),
            AnalysisVariant::WoU => (GradStop::NoUniformity, GradStop::NoUniformity),
            AnalysisVariant::WoAA => (GradStop::NoAlignment, GradStop::None),
            AnalysisVariant::WoAU => (GradStop::NoUniformity, GradStop::None),
            AnalysisVariant::WoSA => (GradStop::None, GradStop::NoAlignment),
            AnalysisVariant::WoSU => (GradStop::None, GradStop::NoUniformity),
        };
        cfg.aug_grad_stop = aug;
        cfg.sim_grad_stop = sim;
    }
}

impl FromStr for AnalysisVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AnalysisVariant::ALL
            .iter()
            .copied()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown analysis variant `{s}`")))
    }
}
