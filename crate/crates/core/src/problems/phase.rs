//! Phase observation with BPSK symbols marginalised out.
//!
//! `y_d = a_d exp(j x_d) + z_d` with `a_d = +-1` equiprobable and `z_d`
//! circular Gaussian, `E|z_d|^2 = tau_n^2`. Writing
//! `u_d = 2 Re(y_d e^{-j x_d}) / tau_n^2` and
//! `v_d = 2 Im(y_d e^{-j x_d}) / tau_n^2`,
//!
//! ```text
//! log p(y_d | x_d)  = -ln(pi tau_n^2) - (|y_d|^2 + 1) / tau_n^2 + ln cosh(u_d)
//! d/dx_d            = tanh(u_d) v_d
//! d^2/dx_d^2        = (1 - tanh^2(u_d)) v_d^2 - tanh(u_d) u_d
//! ```
//!
//! using `du/dx = v` and `dv/dx = -u`.

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problems::LikelihoodModel;
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOffsetLikelihood {
    dim: usize,
    tau_n2: f64,
}

/// `ln cosh(u)` without overflow.
fn ln_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl PhaseOffsetLikelihood {
    pub fn new(dim: usize, tau_n2: f64) -> Result<Self> {
        if !(tau_n2 > 0.0) || !tau_n2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be finite and > 0, got {tau_n2}"
            )));
        }
        Ok(Self { dim, tau_n2 })
    }

    pub fn tau_n2(&self) -> f64 {
        self.tau_n2
    }

    /// SNR under the unit-modulus signal convention, `10 log10(1 / tau_n^2)`.
    pub fn snr_db(&self) -> f64 {
        -10.0 * self.tau_n2.log10()
    }

    fn uv(&self, y: Complex64, x: f64) -> (f64, f64) {
        let w = y * Complex64::new(x.cos(), -x.sin());
        (2.0 * w.re / self.tau_n2, 2.0 * w.im / self.tau_n2)
    }

    pub fn sample_y_seeded(&self, x: ArrayView1<'_, f64>, seed: u64) -> Vec<Complex64> {
        self.sample_y(x, &mut rng_from_seed(seed))
    }

    /// Per-symbol marginal log-likelihood.
    pub fn loglik_d(&self, y: Complex64, x: f64) -> f64 {
        let (u, _) = self.uv(y, x);
        -(std::f64::consts::PI * self.tau_n2).ln() - (y.norm_sqr() + 1.0) / self.tau_n2 + ln_cosh(u)
    }

    pub fn loglik(&self, y: &[Complex64], x: ArrayView1<'_, f64>) -> f64 {
        y.iter().zip(x.iter()).map(|(&yd, &xd)| self.loglik_d(yd, xd)).sum()
    }

    /// `d log p(y_d | x_d) / d x_d`.
    pub fn score_d(&self, y: Complex64, x: f64) -> f64 {
        let (u, v) = self.uv(y, x);
        u.tanh() * v
    }

    /// `d^2 log p(y_d | x_d) / d x_d^2`.
    pub fn d2(&self, y: Complex64, x: f64) -> f64 {
        let (u, v) = self.uv(y, x);
        let t = u.tanh();
        (1.0 - t * t) * v * v - t * u
    }
}

impl LikelihoodModel for PhaseOffsetLikelihood {
    type Obs = Vec<Complex64>;

    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_y(&self, x: ArrayView1<'_, f64>, rng: &mut SimRng) -> Vec<Complex64> {
        let s = (0.5 * self.tau_n2).sqrt();
        x.iter()
            .map(|&xd| {
                let a = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::from_polar(a, xd) + Complex64::new(s * re, s * im)
            })
            .collect()
    }

    fn score(&self, y: &Vec<Complex64>, x: ArrayView1<'_, f64>) -> Array1<f64> {
        Array1::from_iter(y.iter().zip(x.iter()).map(|(&yd, &xd)| self.score_d(yd, xd)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_points(n: usize, seed: u64) -> Vec<(Complex64, f64, f64)> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let tau_n2 = rng.random_range(0.05..1.0);
                let y = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let x = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                (y, x, tau_n2)
            })
            .collect()
    }

    #[test]
    fn zero_observation() {
        let l = PhaseOffsetLikelihood::new(1, 0.2).unwrap();
        let y = Complex64::new(0.0, 0.0);
        let want = -(std::f64::consts::PI * 0.2).ln() - 1.0 / 0.2;
        assert!((l.loglik_d(y, 0.7) - want).abs() < 1e-15);
        assert_eq!(l.score_d(y, 0.7), 0.0);
    }

    #[test]
    fn score_matches_finite_differences() {
        let h = 1e-6;
        for (y, x, t) in random_points(100, 1) {
            let l = PhaseOffsetLikelihood::new(1, t).unwrap();
            let fd = (l.loglik_d(y, x + h) - l.loglik_d(y, x - h)) / (2.0 * h);
            let s = l.score_d(y, x);
            assert!((fd - s).abs() <= 1e-6 * s.abs().max(1.0), "{fd} vs {s}");
        }
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let h = 1e-4;
        for (y, x, t) in random_points(100, 2) {
            let l = PhaseOffsetLikelihood::new(1, t).unwrap();
            let fd = (l.loglik_d(y, x + h) - 2.0 * l.loglik_d(y, x) + l.loglik_d(y, x - h)) / (h * h);
            let d2 = l.d2(y, x);
            assert!((fd - d2).abs() <= 1e-5 * d2.abs().max(1.0), "{fd} vs {d2}");
        }
    }

    #[test]
    fn marginalisation_symmetry_is_exact() {
        for (y, x, t) in random_points(200, 3) {
            let l = PhaseOffsetLikelihood::new(1, t).unwrap();
            assert_eq!(l.loglik_d(y, x).to_bits(), l.loglik_d(-y, x).to_bits());
        }
    }

    #[test]
    fn vector_score_stacks_components() {
        let l = PhaseOffsetLikelihood::new(3, 0.2).unwrap();
        let x = array![0.1, -0.4, 1.2];
        let y = l.sample_y_seeded(x.view(), 3);
        let s = l.score(&y, x.view());
        for d in 0..3 {
            assert_eq!(s[d], l.score_d(y[d], x[d]));
        }
        assert_eq!(y, l.sample_y_seeded(x.view(), 3));
    }

    #[test]
    fn noise_variance_convention() {
        let l = PhaseOffsetLikelihood::new(1, 0.2).unwrap();
        let mut rng = rng_from_seed(8);
        let n = 100_000;
        let mut e2 = 0.0;
        for _ in 0..n {
            let y = l.sample_y(array![0.0].view(), &mut rng)[0];
            // Strip the symbol: a = sign of the real part dominates at this SNR
            // only approximately, so measure |y|^2 - 1 = |z|^2 + 2 a Re z instead.
            e2 += y.norm_sqr() - 1.0;
        }
        let mean = e2 / n as f64;
        assert!((mean - 0.2).abs() < 0.01, "{mean}");
        assert!((l.snr_db() - 6.989_700_043_360_188).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_variance() {
        assert!(PhaseOffsetLikelihood::new(1, 0.0).is_err());
        assert!(PhaseOffsetLikelihood::new(1, -1.0).is_err());
    }
}
