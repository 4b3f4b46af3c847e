use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, qr_orthogonal, spd_inverse_logdet};
use crate::problems::Prior;
use crate::rng::rng_from_seed;
use crate::score::{check_len, ScoreModel};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Dimension of the benchmark mixture.
pub const PAPER_MIXTURE_DIM: usize = 10;

/// Finite mixture of full-covariance Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianMixturePrior {
    weights: Vec<f64>,
    means: Vec<Array1<f64>>,
    covs: Vec<Array2<f64>>,
    chol: Vec<Array2<f64>>,
    precisions: Vec<Array2<f64>>,
    /// `ln pi_k - logdet(Sigma_k)/2 - D ln(2 pi)/2`.
    log_coef: Vec<f64>,
}

impl GaussianMixturePrior {
    pub fn new(weights: Vec<f64>, means: Vec<Array1<f64>>, covs: Vec<Array2<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covs.len() != k {
            return Err(Error::InvalidArgument(
                "mixture needs matching, non-empty weights/means/covariances".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        let d = means[0].len();
        let mut chol = Vec::with_capacity(k);
        let mut precisions = Vec::with_capacity(k);
        let mut log_coef = Vec::with_capacity(k);
        for c in 0..k {
            if means[c].len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: means[c].len(),
                });
            }
            if covs[c].dim() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: covs[c].nrows(),
                });
            }
            chol.push(cholesky(covs[c].view())?);
            let (prec, logdet) = spd_inverse_logdet(covs[c].view())?;
            precisions.push(prec);
            log_coef.push(weights[c].ln() - 0.5 * logdet - 0.5 * d as f64 * LN_2PI);
        }
        Ok(Self {
            weights,
            means,
            covs,
            chol,
            precisions,
            log_coef,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Array1<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Array2<f64>] {
        &self.covs
    }

    pub fn precisions(&self) -> &[Array2<f64>] {
        &self.precisions
    }

    /// Draws `n` samples, also returning the component index of each.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let d = self.dim();
        let mut rng = rng_from_seed(seed);
        let mut out = Array2::zeros((n, d));
        let mut labels = Vec::with_capacity(n);
        let mut z = Array1::<f64>::zeros(d);
        for mut row in out.outer_iter_mut() {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = self.weights.len() - 1;
            for (c, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = c;
                    break;
                }
            }
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            row.assign(&(&self.means[k] + &self.chol[k].dot(&z)));
            labels.push(k);
        }
        (out, labels)
    }

    /// Log of each weighted component density at `x`, and the precision
    /// times `x - mu_k` for each component.
    fn component_terms(&self, x: ArrayView1<'_, f64>) -> (Vec<f64>, Vec<Array1<f64>>) {
        let mut logs = Vec::with_capacity(self.weights.len());
        let mut pds = Vec::with_capacity(self.weights.len());
        for c in 0..self.weights.len() {
            let diff = &x - &self.means[c];
            let pd = self.precisions[c].dot(&diff);
            logs.push(self.log_coef[c] - 0.5 * diff.dot(&pd));
            pds.push(pd);
        }
        (logs, pds)
    }

    /// Posterior component probabilities `r_k(x)`.
    pub fn responsibilities(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_len(x, self.dim())?;
        let (logs, _) = self.component_terms(x);
        Ok(softmax(&logs))
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(v: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(v);
    v.iter().map(|x| (x - lse).exp()).collect()
}

impl ScoreModel for GaussianMixturePrior {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// `sum_k r_k(x) * (-Sigma_k^{-1} (x - mu_k))`.
    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_len(x, self.dim())?;
        let (logs, pds) = self.component_terms(x);
        let r = softmax(&logs);
        let mut s = Array1::zeros(self.dim());
        for (rk, pd) in r.iter().zip(&pds) {
            s.scaled_add(-rk, pd);
        }
        Ok(s)
    }
}

impl Prior for GaussianMixturePrior {
    fn sample(&self, n: usize, seed: u64) -> Array2<f64> {
        self.sample_labeled(n, seed).0
    }

    fn logpdf(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        check_len(x, self.dim())?;
        Ok(log_sum_exp(&self.component_terms(x).0))
    }

    /// `sum_k pi_k (|mu_k|^2 + tr Sigma_k)`.
    fn second_moment(&self) -> f64 {
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.covs))
            .map(|(w, (m, c))| w * (m.dot(m) + c.diag().sum()))
            .sum()
    }
}

/// `n` points linearly spaced on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// The three-component benchmark prior in `dim` dimensions:
/// weights (.4, .3, .3); means -5, 0, +5 (all coordinates); covariances
/// `I`, `diag(linspace(1, 2))` and `Q diag(linspace(1, 2)) Q^T` with `Q` the
/// orthogonal factor of a seeded Gaussian matrix.
pub fn paper_mixture_dim(dim: usize, seed: u64) -> Result<GaussianMixturePrior> {
    if dim == 0 {
        return Err(Error::InvalidArgument("mixture dimension must be >= 1".into()));
    }
    let eigs = linspace(1.0, 2.0, dim);
    let diag = Array2::from_diag(&Array1::from(eigs));
    let mut rng = rng_from_seed(seed);
    let g = Array2::from_shape_fn((dim, dim), |_| rng.sample::<f64, _>(StandardNormal));
    let q = qr_orthogonal(g.view())?;
    let mut rotated = q.dot(&diag).dot(&q.t());
    for i in 0..dim {
        for j in 0..i {
            rotated[[i, j]] = rotated[[j, i]];
        }
    }
    GaussianMixturePrior::new(
        vec![0.4, 0.3, 0.3],
        vec![
            Array1::from_elem(dim, -5.0),
            Array1::zeros(dim),
            Array1::from_elem(dim, 5.0),
        ],
        vec![Array2::eye(dim), diag, rotated],
    )
}

pub fn paper_mixture(seed: u64) -> Result<GaussianMixturePrior> {
    paper_mixture_dim(PAPER_MIXTURE_DIM, seed)
}
