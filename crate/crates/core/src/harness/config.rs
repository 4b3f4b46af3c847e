use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Activation;
use crate::problems::{ProblemPreset, ProblemSpec};
use crate::reference::AscentConfig;
use crate::rng::fnv1a;
use crate::train::{ArchSpec, BatchSize, SplitRule, TrainConfig};

/// Largest hidden width and dataset size allowed at desk scale.
pub const DESK_MAX_WIDTH: usize = 200;
pub const DESK_MAX_N: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Paper,
    Desk,
}

/// Architecture and optimiser settings used for every `n <= max_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainTier {
    /// `None` matches every dataset size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<usize>,
    pub arch: ArchSpec,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Tiers are tried in order; the first whose `max_n` admits `n` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrainPlan {
    pub tiers: Vec<TrainTier>,
}

impl TrainPlan {
    pub fn for_n(&self, n: usize) -> Result<&TrainTier> {
        self.tiers
            .iter()
            .find(|t| t.max_n.is_none_or(|m| n <= m))
            .ok_or_else(|| Error::Config(format!("no training tier covers n = {n}")))
    }

    pub fn preset(scale: Scale, problem: ProblemPreset) -> Self {
        match (scale, problem) {
            (Scale::Paper, ProblemPreset::MixtureDenoise) => TrainPlan {
                tiers: vec![
                    paper_tier(Some(1_000), 5, 1000, 1e-5, BatchSize::Full),
                    paper_tier(Some(10_000), 5, 50, 1e-4, BatchSize::Size(8000)),
                    paper_tier(None, 5, 200, 1e-5, BatchSize::Size(8000)),
                ],
            },
            (Scale::Paper, ProblemPreset::PhaseOffset) => TrainPlan {
                tiers: vec![
                    paper_tier(Some(1_000), 2, 1000, 1e-5, BatchSize::Full),
                    paper_tier(None, 2, 1000, 1e-5, BatchSize::Size(8000)),
                ],
            },
            (Scale::Desk, ProblemPreset::MixtureDenoise) => TrainPlan {
                tiers: vec![
                    desk_tier(Some(1_000), Activation::Tanh, 0.2, 6000),
                    desk_tier(None, Activation::Tanh, 0.1, 6000),
                ],
            },
            (Scale::Desk, ProblemPreset::PhaseOffset) => TrainPlan {
                tiers: vec![desk_tier(None, Activation::Softplus, 0.1, 6000)],
            },
        }
    }
}

fn paper_tier(max_n: Option<usize>, depth: usize, width: usize, lr: f64, batch: BatchSize) -> TrainTier {
    TrainTier {
        max_n,
        arch: ArchSpec::new(vec![width; depth], Activation::Softplus).with_bias(true),
        train: TrainConfig {
            learning_rate: lr,
            batch_size: batch,
            patience: 200,
            split: SplitRule::Paper,
            ..TrainConfig::default()
        },
    }
}

fn desk_tier(max_n: Option<usize>, act: Activation, val_fraction: f64, max_steps: usize) -> TrainTier {
    TrainTier {
        max_n,
        arch: ArchSpec::new(vec![64, 64], act).with_bias(true),
        train: TrainConfig {
            learning_rate: 1e-3,
            batch_size: BatchSize::Size(256),
            patience: 100,
            split: SplitRule::ValFraction(val_fraction),
            max_steps,
            val_every: 10,
            ..TrainConfig::default()
        },
    }
}

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_scale")]
    pub scale: Scale,
    pub n_values: Vec<usize>,
    /// SNR grid for the SNR sweeps.
    #[serde(default)]
    pub snr_values_db: Vec<f64>,
    /// Phase noise variances for the phase SNR sweep; takes precedence over
    /// `snr_values_db` there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_n2_values: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
    /// Master seed every random stream is derived from.
    #[serde(default)]
    pub seed: u64,
    /// Overrides the training preset implied by `scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainPlan>,
    pub oracle_n: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Dataset size for the SNR sweeps; defaults to the largest `n_values`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_n: Option<usize>,
    /// Joint draws used for the RMSE columns.
    #[serde(default = "default_rmse_pairs")]
    pub rmse_pairs: usize,
    #[serde(default)]
    pub map: AscentConfig,
    /// Fills the `wall_time_s` column. Off by default so reruns are
    /// byte-identical.
    #[serde(default)]
    pub emit_wall_time: bool,
}

fn default_scale() -> Scale {
    Scale::Desk
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_rmse_pairs() -> usize {
    2000
}

impl ExperimentConfig {
    /// Desk-scale defaults for a preset: `n` in `{1e2, 1e3, 1e4}`, three seeds.
    pub fn desk(preset: ProblemPreset) -> Self {
        let snr_values_db = match preset {
            ProblemPreset::MixtureDenoise => vec![10.0, 20.0, 30.0, 40.0],
            ProblemPreset::PhaseOffset => vec![],
        };
        let tau_n2_values = match preset {
            ProblemPreset::MixtureDenoise => None,
            ProblemPreset::PhaseOffset => Some(vec![0.2, 0.02]),
        };
        Self {
            problem: ProblemSpec::preset(preset),
            scale: Scale::Desk,
            n_values: vec![100, 1_000, 10_000],
            snr_values_db,
            tau_n2_values,
            seeds: vec![0, 1, 2],
            seed: 0,
            train: None,
            oracle_n: 200_000,
            output_dir: default_output_dir(),
            snr_n: None,
            rmse_pairs: default_rmse_pairs(),
            map: AscentConfig::default(),
            emit_wall_time: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn train_plan(&self) -> TrainPlan {
        self.train
            .clone()
            .unwrap_or_else(|| TrainPlan::preset(self.scale, self.problem.preset))
    }

    pub fn max_n(&self) -> usize {
        self.n_values.iter().copied().max().unwrap_or(0)
    }

    pub fn snr_n(&self) -> usize {
        self.snr_n.unwrap_or_else(|| self.max_n())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::Config("n_values must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.n_values.iter().any(|&n| n < 2) {
            return Err(Error::Config("every n must be >= 2".into()));
        }
        if self.oracle_n < self.max_n().max(self.snr_n()) {
            return Err(Error::Config(format!(
                "oracle_n ({}) must be >= the largest n ({})",
                self.oracle_n,
                self.max_n().max(self.snr_n())
            )));
        }
        if self.rmse_pairs == 0 {
            return Err(Error::Config("rmse_pairs must be >= 1".into()));
        }
        if self.snr_values_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("snr_values_db must be finite".into()));
        }
        if let Some(t) = &self.tau_n2_values {
            if t.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Config("tau_n2_values must be positive".into()));
            }
        }
        self.problem.build()?;
        let plan = self.train_plan();
        for &n in self.n_values.iter().chain(std::iter::once(&self.snr_n())) {
            let tier = plan.for_n(n)?;
            tier.train.validate()?;
            tier.train.split.validation_size(n)?;
        }
        if self.scale == Scale::Desk {
            if let Some(&n) = self.n_values.iter().find(|&&n| n > DESK_MAX_N) {
                return Err(Error::Config(format!("desk scale allows n <= {DESK_MAX_N}, got {n}")));
            }
            if self.snr_n() > DESK_MAX_N {
                return Err(Error::Config(format!("desk scale allows snr_n <= {DESK_MAX_N}")));
            }
            for tier in &plan.tiers {
                if let Some(&w) = tier.arch.hidden.iter().find(|&&w| w > DESK_MAX_WIDTH) {
                    return Err(Error::Config(format!(
                        "desk scale allows hidden width <= {DESK_MAX_WIDTH}, got {w}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Stable hash of the canonical JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }
}
