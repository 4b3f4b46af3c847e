use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::InfoMatrix;
use crate::problems::LikelihoodModel;
use crate::rng::{rng_from_seed, SimRng};

/// `y = x + z`, `z ~ N(0, tau^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDenoisingLikelihood {
    dim: usize,
    tau: f64,
}

impl GaussianDenoisingLikelihood {
    pub fn new(dim: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be finite and > 0, got {tau}")));
        }
        Ok(Self { dim, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn sample_y_seeded(&self, x: ArrayView1<'_, f64>, seed: u64) -> Array1<f64> {
        self.sample_y(x, &mut rng_from_seed(seed))
    }

    /// `(1 / tau^2) I`, independent of `x`.
    pub fn fisher_matrix(&self) -> InfoMatrix {
        InfoMatrix::scaled_identity(self.dim, 1.0 / (self.tau * self.tau))
    }

    /// `-|y - x|^2 / (2 tau^2)` up to the normalising constant.
    pub fn log_likelihood_unnormalised(&self, y: ArrayView1<'_, f64>, x: ArrayView1<'_, f64>) -> f64 {
        let r = &y - &x;
        -0.5 * r.dot(&r) / (self.tau * self.tau)
    }
}

impl LikelihoodModel for GaussianDenoisingLikelihood {
    type Obs = Array1<f64>;

    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_y(&self, x: ArrayView1<'_, f64>, rng: &mut SimRng) -> Array1<f64> {
        x.mapv(|v| v + self.tau * rng.sample::<f64, _>(StandardNormal))
    }

    fn score(&self, y: &Array1<f64>, x: ArrayView1<'_, f64>) -> Array1<f64> {
        (y - &x) / (self.tau * self.tau)
    }

    fn fisher(&self, _x: ArrayView1<'_, f64>) -> Option<InfoMatrix> {
        Some(self.fisher_matrix())
    }
}
