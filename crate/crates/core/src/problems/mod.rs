//! Benchmark priors and observation models.

mod denoise;
mod mixture;
mod phase;
mod wiener;

pub use denoise::GaussianDenoisingLikelihood;
pub(crate) use mixture::softmax;
pub use mixture::{linspace, paper_mixture, paper_mixture_dim, GaussianMixturePrior, PAPER_MIXTURE_DIM};
pub use phase::PhaseOffsetLikelihood;
pub use wiener::WienerPhasePrior;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::InfoMatrix;
use crate::rng::SimRng;
use crate::score::ScoreModel;

/// A prior with a sampler, a log density and a closed-form `E|x|^2`.
/// The score comes from the [`ScoreModel`] supertrait.
pub trait Prior: ScoreModel {
    fn sample(&self, n: usize, seed: u64) -> Array2<f64>;
    fn logpdf(&self, x: ArrayView1<'_, f64>) -> Result<f64>;
    fn second_moment(&self) -> f64;
}

/// An observation model `p(y | x)` with a differentiable log-likelihood in `x`.
pub trait LikelihoodModel: Sync {
    type Obs;

    fn dim(&self) -> usize;
    fn sample_y(&self, x: ArrayView1<'_, f64>, rng: &mut SimRng) -> Self::Obs;
    /// `grad_x log p(y | x)`.
    fn score(&self, y: &Self::Obs, x: ArrayView1<'_, f64>) -> Array1<f64>;
    /// Closed-form Fisher information at `x`, when one exists.
    fn fisher(&self, _x: ArrayView1<'_, f64>) -> Option<InfoMatrix> {
        None
    }
}

/// Noise standard deviation giving `snr_db = 10 log10(E|x|^2 / tau^2)`.
pub fn snr_to_tau<P: Prior + ?Sized>(snr_db: f64, prior: &P) -> f64 {
    tau_from_power(snr_db, prior.second_moment())
}

pub fn tau_from_power(snr_db: f64, second_moment: f64) -> f64 {
    (second_moment * 10f64.powf(-snr_db / 10.0)).sqrt()
}

/// Phase-model noise variance for a unit-modulus signal, `10^(-snr_db / 10)`.
pub fn tau_n2_from_snr(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

pub const DEFAULT_MIXTURE_SNR_DB: f64 = 30.0;
pub const DEFAULT_PHASE_TAU_N2: f64 = 0.2;
pub const DEFAULT_TAU_W: f64 = 0.2;
pub const DEFAULT_PHASE_DIM: usize = 10;
pub const DEFAULT_JD_M: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemPreset {
    #[serde(rename = "paper-mixture-denoise")]
    MixtureDenoise,
    #[serde(rename = "paper-phase-offset")]
    PhaseOffset,
}

impl ProblemPreset {
    pub fn name(self) -> &'static str {
        match self {
            ProblemPreset::MixtureDenoise => "paper-mixture-denoise",
            ProblemPreset::PhaseOffset => "paper-phase-offset",
        }
    }
}

/// A named preset plus optional overrides, as it appears in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub preset: ProblemPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Mixture: sets tau from `E|x|^2`. Phase: sets `tau_n^2 = 10^(-snr/10)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    /// Mixture noise std, overrides `snr_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Phase noise variance, overrides `snr_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_n2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_w: Option<f64>,
    /// Seed for the eigenvectors of the third mixture component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture_seed: Option<u64>,
    /// Observation draws per prior sample for the phase `J_D` estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jd_m: Option<usize>,
}

impl ProblemSpec {
    pub fn preset(preset: ProblemPreset) -> Self {
        Self {
            preset,
            dim: None,
            snr_db: None,
            tau: None,
            tau_n2: None,
            tau_w: None,
            mixture_seed: None,
            jd_m: None,
        }
    }

    pub fn build(&self) -> Result<Problem> {
        match self.preset {
            ProblemPreset::MixtureDenoise => {
                if self.tau_n2.is_some() || self.tau_w.is_some() || self.jd_m.is_some() {
                    return Err(Error::Config(
                        "tau_n2, tau_w and jd_m only apply to paper-phase-offset".into(),
                    ));
                }
                let dim = self.dim.unwrap_or(PAPER_MIXTURE_DIM);
                let prior = paper_mixture_dim(dim, self.mixture_seed.unwrap_or(0))?;
                let tau = match self.tau {
                    Some(t) => t,
                    None => snr_to_tau(self.snr_db.unwrap_or(DEFAULT_MIXTURE_SNR_DB), &prior),
                };
                Problem::mixture(prior, tau)
            }
            ProblemPreset::PhaseOffset => {
                if self.tau.is_some() || self.mixture_seed.is_some() {
                    return Err(Error::Config(
                        "tau and mixture_seed only apply to paper-mixture-denoise".into(),
                    ));
                }
                let tau_n2 = match (self.tau_n2, self.snr_db) {
                    (Some(t), _) => t,
                    (None, Some(s)) => tau_n2_from_snr(s),
                    (None, None) => DEFAULT_PHASE_TAU_N2,
                };
                Problem::phase(
                    self.dim.unwrap_or(DEFAULT_PHASE_DIM),
                    self.tau_w.unwrap_or(DEFAULT_TAU_W),
                    tau_n2,
                    self.jd_m.unwrap_or(DEFAULT_JD_M),
                )
            }
        }
    }
}

/// A prior paired with its observation model.
#[derive(Debug, Clone)]
pub enum Problem {
    MixtureDenoise {
        prior: GaussianMixturePrior,
        likelihood: GaussianDenoisingLikelihood,
    },
    PhaseOffset {
        prior: WienerPhasePrior,
        likelihood: PhaseOffsetLikelihood,
        jd_m: usize,
    },
}

impl Problem {
    pub fn mixture(prior: GaussianMixturePrior, tau: f64) -> Result<Self> {
        let likelihood = GaussianDenoisingLikelihood::new(prior.dim(), tau)?;
        Ok(Problem::MixtureDenoise { prior, likelihood })
    }

    pub fn phase(dim: usize, tau_w: f64, tau_n2: f64, jd_m: usize) -> Result<Self> {
        if jd_m == 0 {
            return Err(Error::InvalidArgument("jd_m must be >= 1".into()));
        }
        Ok(Problem::PhaseOffset {
            prior: WienerPhasePrior::new(dim, tau_w)?,
            likelihood: PhaseOffsetLikelihood::new(dim, tau_n2)?,
            jd_m,
        })
    }

    pub fn dim(&self) -> usize {
        self.prior().dim()
    }

    pub fn prior(&self) -> &dyn Prior {
        match self {
            Problem::MixtureDenoise { prior, .. } => prior,
            Problem::PhaseOffset { prior, .. } => prior,
        }
    }

    /// The ground-truth prior score.
    pub fn oracle_score(&self) -> &dyn ScoreModel {
        match self {
            Problem::MixtureDenoise { prior, .. } => prior,
            Problem::PhaseOffset { prior, .. } => prior,
        }
    }

    pub fn sample_prior(&self, n: usize, seed: u64) -> Array2<f64> {
        self.prior().sample(n, seed)
    }

    /// SNR in dB under the problem's own convention.
    pub fn snr_db(&self) -> f64 {
        match self {
            Problem::MixtureDenoise { prior, likelihood } => {
                10.0 * (prior.second_moment() / (likelihood.tau() * likelihood.tau())).log10()
            }
            Problem::PhaseOffset { likelihood, .. } => likelihood.snr_db(),
        }
    }

    /// Phase problem with a new noise variance.
    pub fn with_phase_noise(&self, tau_n2: f64) -> Result<Self> {
        match self {
            Problem::PhaseOffset { prior, jd_m, .. } => Problem::phase(prior.dim(), prior.tau_w(), tau_n2, *jd_m),
            Problem::MixtureDenoise { .. } => {
                Err(Error::InvalidArgument("phase noise applies to the phase problem only".into()))
            }
        }
    }

    /// Same prior, noise re-calibrated to `snr_db`.
    pub fn with_snr(&self, snr_db: f64) -> Result<Self> {
        match self {
            Problem::MixtureDenoise { prior, .. } => {
                Problem::mixture(prior.clone(), snr_to_tau(snr_db, prior))
            }
            Problem::PhaseOffset { prior, jd_m, .. } => {
                Problem::phase(prior.dim(), prior.tau_w(), tau_n2_from_snr(snr_db), *jd_m)
            }
        }
    }
}
