//! Fixtures shared by the kernel benchmarks.

use bcrb_core::problems::{paper_mixture, GaussianMixturePrior, Prior};
use bcrb_core::{Activation, MlpScoreNet};
use ndarray::Array2;

/// Desk-scale score network: `D = 10`, two hidden layers of 64 with biases.
pub fn desk_net() -> MlpScoreNet {
    MlpScoreNet::init_with_bias(&[10, 64, 64, 10], Activation::Tanh, Activation::Identity, true, 7)
        .expect("valid dims")
}

pub fn mixture() -> GaussianMixturePrior {
    paper_mixture(0).expect("preset mixture")
}

pub fn mixture_samples(n: usize) -> Array2<f64> {
    mixture().sample(n, 11)
}

/// Symmetric positive semi-definite `d x d` matrix.
pub fn psd(d: usize) -> Array2<f64> {
    let b = Array2::from_shape_fn((d, d), |(i, j)| ((i * 7 + j * 13) % 11) as f64 - 5.0);
    b.dot(&b.t())
}
