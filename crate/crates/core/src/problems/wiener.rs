use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::InfoMatrix;
use crate::problems::Prior;
use crate::rng::rng_from_seed;
use crate::score::{check_len, ScoreModel};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Gaussian random walk over `D` phases: `x_1 ~ N(0, 1)` and
/// `x_d = x_{d-1} + w_d`, `w_d ~ N(0, tau_w^2)` for `d = 2..D`.
#[derive(Debug, Clone)]
pub struct WienerPhasePrior {
    dim: usize,
    tau_w: f64,
    /// Tridiagonal precision: `(diag, off)` with `off[d]` coupling `d, d+1`.
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl WienerPhasePrior {
    pub fn new(dim: usize, tau_w: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("phase prior needs D >= 1".into()));
        }
        if !(tau_w > 0.0) || !tau_w.is_finite() {
            return Err(Error::InvalidArgument(format!("tau_w must be > 0, got {tau_w}")));
        }
        let inv = 1.0 / (tau_w * tau_w);
        let mut diag = vec![0.0; dim];
        let off = vec![-inv; dim - 1];
        diag[0] = 1.0;
        for d in 1..dim {
            diag[d - 1] += inv;
            diag[d] += inv;
        }
        Ok(Self { dim, tau_w, diag, off })
    }

    pub fn tau_w(&self) -> f64 {
        self.tau_w
    }

    /// The tridiagonal precision matrix `Lambda` as a dense matrix.
    pub fn precision(&self) -> InfoMatrix {
        let mut a = Array2::zeros((self.dim, self.dim));
        for d in 0..self.dim {
            a[[d, d]] = self.diag[d];
        }
        for (d, &o) in self.off.iter().enumerate() {
            a[[d, d + 1]] = o;
            a[[d + 1, d]] = o;
        }
        InfoMatrix::mirror_upper(a)
    }

    /// `Cov(x_i, x_j) = 1 + tau_w^2 * min(i, j)` (zero-based indices).
    pub fn covariance(&self) -> InfoMatrix {
        let t2 = self.tau_w * self.tau_w;
        InfoMatrix::mirror_upper(Array2::from_shape_fn((self.dim, self.dim), |(i, j)| {
            1.0 + t2 * i.min(j) as f64
        }))
    }

    /// `Lambda x`, summed in the order `d-1, d, d+1`.
    fn precision_times(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.dim;
        Array1::from_shape_fn(n, |d| {
            let mut acc = 0.0;
            if d > 0 {
                acc += self.off[d - 1] * x[d - 1];
            }
            acc += self.diag[d] * x[d];
            if d + 1 < n {
                acc += self.off[d] * x[d + 1];
            }
            acc
        })
    }
}

impl ScoreModel for WienerPhasePrior {
    fn dim(&self) -> usize {
        self.dim
    }

    /// `-Lambda x`.
    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_len(x, self.dim)?;
        Ok(-self.precision_times(x))
    }
}

impl Prior for WienerPhasePrior {
    fn sample(&self, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        let mut out = Array2::zeros((n, self.dim));
        for mut row in out.outer_iter_mut() {
            let mut x: f64 = rng.sample(StandardNormal);
            row[0] = x;
            for d in 1..self.dim {
                x += self.tau_w * rng.sample::<f64, _>(StandardNormal);
                row[d] = x;
            }
        }
        out
    }

    fn logpdf(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        check_len(x, self.dim)?;
        let q = x.dot(&self.precision_times(x));
        // det(Lambda) = tau_w^{-2(D-1)}.
        let logdet = -2.0 * (self.dim as f64 - 1.0) * self.tau_w.ln();
        Ok(-0.5 * q + 0.5 * logdet - 0.5 * self.dim as f64 * LN_2PI)
    }

    fn second_moment(&self) -> f64 {
        self.covariance().trace()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    use crate::linalg::mean_outer;

    #[test]
    fn one_dimensional_score() {
        let p = WienerPhasePrior::new(1, 0.2).unwrap();
        assert_eq!(p.score(array![1.5].view()).unwrap(), array![-1.5]);
    }

    #[test]
    fn two_dimensional_hand_derivative() {
        let p = WienerPhasePrior::new(2, 1.0).unwrap();
        assert_eq!(p.score(array![1.0, 1.0].view()).unwrap(), array![-1.0, 0.0]);
    }

    #[test]
    fn score_is_exactly_minus_lambda_x() {
        let p = WienerPhasePrior::new(10, 0.2).unwrap();
        let lam = p.precision();
        let xs = p.sample(20, 4);
        for x in xs.outer_iter() {
            let s = p.score(x).unwrap();
            for i in 0..10 {
                let mut acc = 0.0;
                for j in 0..10 {
                    if lam.get(i, j) != 0.0 {
                        acc += lam.get(i, j) * x[j];
                    }
                }
                assert_eq!(s[i], -acc);
            }
        }
        // Tridiagonal and symmetric.
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(lam.get(i, j), lam.get(j, i));
                if i.abs_diff(j) > 1 {
                    assert_eq!(lam.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn precision_inverts_covariance() {
        let p = WienerPhasePrior::new(10, 0.2).unwrap();
        let prod = p.precision().as_array().dot(p.covariance().as_array());
        let err = (&prod - &Array2::<f64>::eye(10)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn sample_covariance_matches_analytic() {
        let p = WienerPhasePrior::new(10, 0.2).unwrap();
        let n = 100_000;
        let xs = p.sample(n, 12);
        let emp = mean_outer(xs.view()).unwrap();
        let cov = p.covariance();
        for i in 0..10 {
            for j in 0..10 {
                // Var(x_i x_j) = S_ii S_jj + S_ij^2 for zero-mean Gaussians.
                let se = ((cov.get(i, i) * cov.get(j, j) + cov.get(i, j).powi(2)) / n as f64).sqrt();
                assert!((emp.get(i, j) - cov.get(i, j)).abs() < 3.0 * se + 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn score_matches_finite_difference_of_logpdf() {
        let p = WienerPhasePrior::new(6, 0.3).unwrap();
        let h = 1e-5;
        for x in p.sample(20, 2).outer_iter() {
            let s = p.score(x).unwrap();
            for k in 0..6 {
                let mut xp = x.to_owned();
                let mut xm = x.to_owned();
                xp[k] += h;
                xm[k] -= h;
                let fd = (p.logpdf(xp.view()).unwrap() - p.logpdf(xm.view()).unwrap()) / (2.0 * h);
                assert!((fd - s[k]).abs() <= 1e-5 * s[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(WienerPhasePrior::new(0, 0.2).is_err());
        assert!(WienerPhasePrior::new(3, 0.0).is_err());
        assert!(WienerPhasePrior::new(3, f64::NAN).is_err());
    }
}
