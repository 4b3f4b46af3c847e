//! Benchmark estimators for Gaussian-mixture denoising and RMSE evaluation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse_logdet, InfoMatrix};
use crate::net::{chunks, EVAL_CHUNK};
use crate::problems::{softmax, GaussianDenoisingLikelihood, GaussianMixturePrior, LikelihoodModel, Prior};
use crate::rng::{derive_seed, derived_rng};
use crate::score::{check_len, ScoreModel};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Closed-form posterior mean for `y = x + N(0, tau^2 I)` under a Gaussian
/// mixture prior. Per-component quantities are precomputed once per `tau`.
#[derive(Debug, Clone)]
pub struct MmseDenoiser {
    tau: f64,
    /// `ln pi_k - logdet(S_k)/2 - D ln(2 pi)/2` with `S_k = Sigma_k + tau^2 I`.
    log_coef: Vec<f64>,
    means: Vec<Array1<f64>>,
    s_inv: Vec<Array2<f64>>,
    /// `C_k Sigma_k^{-1} mu_k`.
    offset: Vec<Array1<f64>>,
    /// `C_k / tau^2`.
    gain: Vec<Array2<f64>>,
}

impl MmseDenoiser {
    pub fn new(prior: &GaussianMixturePrior, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be finite and > 0, got {tau}")));
        }
        let d = prior.dim();
        let t2 = tau * tau;
        let eye = Array2::<f64>::eye(d);
        let k = prior.n_components();
        let mut out = Self {
            tau,
            log_coef: Vec::with_capacity(k),
            means: prior.means().to_vec(),
            s_inv: Vec::with_capacity(k),
            offset: Vec::with_capacity(k),
            gain: Vec::with_capacity(k),
        };
        for c in 0..k {
            let s = &prior.covariances()[c] + &(t2 * &eye);
            let (s_inv, logdet) = spd_inverse_logdet(s.view())?;
            out.log_coef.push(prior.weights()[c].ln() - 0.5 * logdet - 0.5 * d as f64 * LN_2PI);
            out.s_inv.push(s_inv);
            let p = &prior.precisions()[c];
            let (cov_post, _) = spd_inverse_logdet((p + &(&eye / t2)).view())?;
            out.offset.push(cov_post.dot(&p.dot(&prior.means()[c])));
            out.gain.push(cov_post / t2);
        }
        Ok(out)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Posterior component weights, proportional to `pi_k N(y; mu_k, S_k)`.
    pub fn posterior_weights(&self, y: ArrayView1<'_, f64>) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.means.len())
            .map(|c| {
                let diff = &y - &self.means[c];
                self.log_coef[c] - 0.5 * diff.dot(&self.s_inv[c].dot(&diff))
            })
            .collect();
        softmax(&logs)
    }

    /// Posterior mean of component `k`.
    pub fn component_mean(&self, k: usize, y: ArrayView1<'_, f64>) -> Array1<f64> {
        &self.offset[k] + &self.gain[k].dot(&y)
    }

    pub fn denoise(&self, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_len(y, self.means[0].len())?;
        let w = self.posterior_weights(y);
        let mut x = Array1::zeros(y.len());
        for (k, wk) in w.iter().enumerate() {
            x.scaled_add(*wk, &self.component_mean(k, y));
        }
        Ok(x)
    }
}

pub fn mmse_denoise(y: ArrayView1<'_, f64>, prior: &GaussianMixturePrior, tau: f64) -> Result<Array1<f64>> {
    MmseDenoiser::new(prior, tau)?.denoise(y)
}

/// Gradient-ascent settings. The defaults are this crate's choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscentConfig {
    /// Initial and largest step size.
    pub step: f64,
    pub iters: usize,
    /// Stop once `|grad| <= tol * (1 + |x|)`.
    pub tol: f64,
    /// Start from the posterior mean of each mixture component.
    pub restarts: bool,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            iters: 2000,
            tol: 1e-9,
            restarts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub x: Array1<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// `log p(x) + log p(y | x)` up to a constant, and its gradient.
fn map_objective(
    prior: &GaussianMixturePrior,
    y: ArrayView1<'_, f64>,
    inv_t2: f64,
    x: &Array1<f64>,
) -> Result<(f64, Array1<f64>)> {
    let r = &y - x;
    let f = prior.logpdf(x.view())? - 0.5 * inv_t2 * r.dot(&r);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let g = prior.score(x.view())? + &(r * inv_t2);
    Ok((f, g))
}

/// Backtracking ascent from `x0`. `history` receives every accepted
/// objective value, starting with the initial one.
pub(crate) fn ascend(
    prior: &GaussianMixturePrior,
    y: ArrayView1<'_, f64>,
    tau: f64,
    cfg: &AscentConfig,
    x0: Array1<f64>,
    mut history: Option<&mut Vec<f64>>,
) -> Result<MapResult> {
    let inv_t2 = 1.0 / (tau * tau);
    let mut x = x0;
    let (mut f, mut g) = map_objective(prior, y, inv_t2, &x)?;
    if let Some(h) = history.as_deref_mut() {
        h.push(f);
    }
    let mut step = cfg.step;
    let mut it = 0;
    while it < cfg.iters {
        let gn2 = g.dot(&g);
        if gn2.sqrt() <= cfg.tol * (1.0 + x.dot(&x).sqrt()) {
            break;
        }
        it += 1;
        // Armijo: accept when f(x + h g) >= f(x) + 1e-4 h |g|^2.
        let mut accepted = false;
        while step > 1e-300 {
            let cand = &x + &(step * &g);
            let (fc, gc) = map_objective(prior, y, inv_t2, &cand)?;
            if fc >= f + 1e-4 * step * gn2 {
                x = cand;
                f = fc;
                g = gc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if let Some(h) = history.as_deref_mut() {
            h.push(f);
        }
        step = (2.0 * step).min(cfg.step);
    }
    let grad_norm = g.dot(&g).sqrt();
    Ok(MapResult { x, objective: f, grad_norm, iterations: it })
}

/// Posterior mode by gradient ascent, started from each component posterior
/// mean (or from `y` when `restarts` is off); the best end point wins.
pub fn map_denoise_with(
    y: ArrayView1<'_, f64>,
    prior: &GaussianMixturePrior,
    mmse: &MmseDenoiser,
    cfg: &AscentConfig,
) -> Result<MapResult> {
    check_len(y, prior.dim())?;
    let starts: Vec<Array1<f64>> = if cfg.restarts {
        (0..prior.n_components()).map(|k| mmse.component_mean(k, y)).collect()
    } else {
        vec![y.to_owned()]
    };
    let mut best: Option<MapResult> = None;
    for x0 in starts {
        let r = ascend(prior, y, mmse.tau(), cfg, x0, None)?;
        if best.as_ref().is_none_or(|b| r.objective > b.objective) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

pub fn map_denoise(
    y: ArrayView1<'_, f64>,
    prior: &GaussianMixturePrior,
    tau: f64,
    cfg: &AscentConfig,
) -> Result<Array1<f64>> {
    let mmse = MmseDenoiser::new(prior, tau)?;
    Ok(map_denoise_with(y, prior, &mmse, cfg)?.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorTag {
    Mmse,
    Map,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseResult {
    pub rmse: f64,
    /// Monte-Carlo standard error of `rmse` (delta method); zero for the bound.
    pub std_err: f64,
    pub n_pairs: usize,
    pub estimator_tag: EstimatorTag,
}

/// Fresh joint draws `(x_i, y_i)`; row `i` of `y` uses its own derived stream.
pub fn sample_pairs(
    prior: &dyn Prior,
    lik: &GaussianDenoisingLikelihood,
    n_pairs: usize,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if n_pairs == 0 {
        return Err(Error::EmptySampleSet);
    }
    let xs = prior.sample(n_pairs, derive_seed(seed, "pairs-x", &[]));
    let mut ys = Array2::zeros(xs.dim());
    for (i, (x, mut y)) in xs.outer_iter().zip(ys.outer_iter_mut()).enumerate() {
        let mut rng = derived_rng(seed, "pairs-y", &[i as u64]);
        y.assign(&lik.sample_y(x, &mut rng));
    }
    Ok((xs, ys))
}

/// RMSE of `estimator` over given pairs.
pub fn rmse_on_pairs<F>(estimator: F, xs: ArrayView2<'_, f64>, ys: ArrayView2<'_, f64>, tag: EstimatorTag) -> Result<RmseResult>
where
    F: Fn(ArrayView1<'_, f64>) -> Result<Array1<f64>> + Sync,
{
    let n = xs.nrows();
    if n == 0 {
        return Err(Error::EmptySampleSet);
    }
    if ys.dim() != xs.dim() {
        return Err(Error::DimensionMismatch { expected: xs.nrows(), got: ys.nrows() });
    }
    let sq: Vec<Result<Vec<f64>>> = chunks(ys)
        .into_par_iter()
        .enumerate()
        .map(|(c, rows)| {
            let base = c * EVAL_CHUNK;
            rows.outer_iter()
                .enumerate()
                .map(|(k, y)| {
                    let e = estimator(y)? - xs.row(base + k);
                    Ok(e.dot(&e))
                })
                .collect()
        })
        .collect();
    let mut errs = Vec::with_capacity(n);
    for part in sq {
        errs.extend(part?);
    }
    let mse = errs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        errs.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let se_mse = (var / n as f64).sqrt();
    let rmse = mse.sqrt();
    let std_err = if rmse > 0.0 { se_mse / (2.0 * rmse) } else { 0.0 };
    Ok(RmseResult { rmse, std_err, n_pairs: n, estimator_tag: tag })
}

/// RMSE of `estimator` on `n_pairs` fresh joint draws.
pub fn rmse_eval<F>(
    estimator: F,
    prior: &dyn Prior,
    lik: &GaussianDenoisingLikelihood,
    n_pairs: usize,
    seed: u64,
    tag: EstimatorTag,
) -> Result<RmseResult>
where
    F: Fn(ArrayView1<'_, f64>) -> Result<Array1<f64>> + Sync,
{
    let (xs, ys) = sample_pairs(prior, lik, n_pairs, seed)?;
    rmse_on_pairs(estimator, xs.view(), ys.view(), tag)
}

/// `sqrt(tr V_B)`, the total-MSE lower bound in RMSE units.
pub fn bound_rmse(vb: &InfoMatrix) -> RmseResult {
    RmseResult {
        rmse: vb.trace().max(0.0).sqrt(),
        std_err: 0.0,
        n_pairs: 0,
        estimator_tag: EstimatorTag::Bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    use crate::problems::paper_mixture;

    fn gaussian(mean: Array1<f64>, cov: Array2<f64>) -> GaussianMixturePrior {
        GaussianMixturePrior::new(vec![1.0], vec![mean], vec![cov]).unwrap()
    }

    fn bimodal_1d() -> GaussianMixturePrior {
        GaussianMixturePrior::new(
            vec![0.3, 0.7],
            vec![array![-2.0], array![1.5]],
            vec![array![[0.5]], array![[1.2]]],
        )
        .unwrap()
    }

    fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn mmse_ridge_shrinkage() {
        let p = gaussian(Array1::zeros(3), Array2::eye(3));
        let y = array![1.0, -2.0, 4.0];
        let x = mmse_denoise(y.view(), &p, 1.0).unwrap();
        assert!(max_abs_diff(&x, &(&y / 2.0)) < 1e-15);
    }

    #[test]
    fn mmse_noiseless_limit() {
        let p = paper_mixture(0).unwrap();
        let y = p.sample(5, 1);
        for row in y.outer_iter() {
            let x = mmse_denoise(row, &p, 1e-4).unwrap();
            let rel = max_abs_diff(&x, &row.to_owned()) / row.dot(&row).sqrt();
            assert!(rel < 1e-3, "{rel}");
        }
    }

    #[test]
    fn mmse_matches_quadrature() {
        let p = bimodal_1d();
        let tau = 0.8;
        let mmse = MmseDenoiser::new(&p, tau).unwrap();
        for &y in &[-3.0, -0.5, 0.2, 1.0, 4.0] {
            // Posterior mean by trapezoid rule on [-15, 15].
            let n = 10_000;
            let (lo, hi) = (-15.0, 15.0);
            let h = (hi - lo) / (n - 1) as f64;
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..n {
                let x = lo + i as f64 * h;
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                let post = (p.logpdf(array![x].view()).unwrap() - 0.5 * (y - x) * (y - x) / (tau * tau)).exp();
                num += w * x * post;
                den += w * post;
            }
            let x = mmse.denoise(array![y].view()).unwrap()[0];
            assert!((x - num / den).abs() < 1e-6, "y={y}: {x} vs {}", num / den);
        }
    }

    #[test]
    fn posterior_weights_sum_to_one() {
        let p = paper_mixture(2).unwrap();
        let mmse = MmseDenoiser::new(&p, 0.5).unwrap();
        for y in p.sample(20, 3).outer_iter() {
            let w = mmse.posterior_weights(y);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn map_equals_linear_estimator_for_gaussian_prior() {
        let cov = array![[2.0, 0.5], [0.5, 1.0]];
        let p = gaussian(array![0.3, -0.1], cov.clone());
        let tau = 0.7;
        let y = array![1.5, -0.8];
        let x = map_denoise(y.view(), &p, tau, &AscentConfig::default()).unwrap();
        // x = mu + Sigma (Sigma + tau^2 I)^{-1} (y - mu).
        let s = &cov + &(tau * tau * Array2::<f64>::eye(2));
        let (s_inv, _) = spd_inverse_logdet(s.view()).unwrap();
        let mu = array![0.3, -0.1];
        let want = &mu + &cov.dot(&s_inv).dot(&(&y - &mu));
        assert!(max_abs_diff(&x, &want) < 1e-6);
        let m = mmse_denoise(y.view(), &p, tau).unwrap();
        assert!(max_abs_diff(&m, &want) < 1e-12);
    }

    #[test]
    fn map_returns_stationary_point() {
        let p = paper_mixture(0).unwrap();
        let tau = 1.0;
        let mmse = MmseDenoiser::new(&p, tau).unwrap();
        let lik = GaussianDenoisingLikelihood::new(10, tau).unwrap();
        let (_, ys) = sample_pairs(&p, &lik, 20, 4).unwrap();
        for y in ys.outer_iter() {
            let r = map_denoise_with(y, &p, &mmse, &AscentConfig::default()).unwrap();
            assert!(r.grad_norm < 1e-6 * (1.0 + r.x.dot(&r.x).sqrt()), "{}", r.grad_norm);
        }
    }

    #[test]
    fn map_beats_component_means_and_grid() {
        let p = bimodal_1d();
        let tau = 1.5;
        let inv_t2 = 1.0 / (tau * tau);
        let mmse = MmseDenoiser::new(&p, tau).unwrap();
        for &y in &[-1.0, 0.0, 0.4, 2.0] {
            let yv = array![y];
            let r = map_denoise_with(yv.view(), &p, &mmse, &AscentConfig::default()).unwrap();
            for mu in [-2.0, 1.5] {
                let (f, _) = map_objective(&p, yv.view(), inv_t2, &array![mu]).unwrap();
                assert!(r.objective >= f);
            }
            let grid_best = (0..20_001)
                .map(|i| -10.0 + i as f64 * 1e-3)
                .map(|x| map_objective(&p, yv.view(), inv_t2, &array![x]).unwrap().0)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(r.objective >= grid_best - 1e-6);
        }
    }

    #[test]
    fn ascent_objective_never_decreases() {
        let p = paper_mixture(0).unwrap();
        let y = Array1::from_elem(10, 1.0);
        let mut hist = Vec::new();
        ascend(&p, y.view(), 0.5, &AscentConfig::default(), Array1::zeros(10), Some(&mut hist)).unwrap();
        assert!(hist.len() > 2);
        assert!(hist.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn map_rejects_non_finite_input() {
        let p = bimodal_1d();
        let r = map_denoise(array![f64::NAN].view(), &p, 1.0, &AscentConfig::default());
        assert!(matches!(r, Err(Error::NonFiniteObjective)));
    }

    #[test]
    fn perfect_estimator_has_zero_rmse() {
        let p = paper_mixture(0).unwrap();
        let lik = GaussianDenoisingLikelihood::new(10, 1.0).unwrap();
        let (xs, ys) = sample_pairs(&p, &lik, 100, 1).unwrap();
        let lookup = |y: ArrayView1<'_, f64>| {
            let i = ys.outer_iter().position(|r| r == y).unwrap();
            Ok(xs.row(i).to_owned())
        };
        let r = rmse_on_pairs(lookup, xs.view(), ys.view(), EstimatorTag::Mmse).unwrap();
        assert_eq!(r.rmse, 0.0);
    }

    #[test]
    fn mmse_risk_matches_analytic() {
        let d = 4;
        let cov = Array2::from_diag(&array![0.5, 1.0, 2.0, 4.0]);
        let p = gaussian(Array1::zeros(d), cov.clone());
        let lik = GaussianDenoisingLikelihood::new(d, 1.0).unwrap();
        let mmse = MmseDenoiser::new(&p, 1.0).unwrap();
        let r = rmse_eval(|y| mmse.denoise(y), &p, &lik, 20_000, 7, EstimatorTag::Mmse).unwrap();
        // tr((Sigma^{-1} + I)^{-1}) = sum s / (1 + s).
        let want: f64 = [0.5f64, 1.0, 2.0, 4.0].iter().map(|s| s / (1.0 + s)).sum();
        let mse = r.rmse * r.rmse;
        let se_mse = 2.0 * r.rmse * r.std_err;
        assert!((mse - want).abs() < 3.0 * se_mse, "{mse} vs {want} (se {se_mse})");
    }

    #[test]
    fn bound_rmse_is_root_trace() {
        let b = bound_rmse(&InfoMatrix::scaled_identity(10, 0.2));
        assert!((b.rmse - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.estimator_tag, EstimatorTag::Bound);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let p = paper_mixture(0).unwrap();
        let lik = GaussianDenoisingLikelihood::new(10, 0.5).unwrap();
        let mmse = MmseDenoiser::new(&p, 0.5).unwrap();
        let a = rmse_eval(|y| mmse.denoise(y), &p, &lik, 700, 3, EstimatorTag::Mmse).unwrap();
        let b = rmse_eval(|y| mmse.denoise(y), &p, &lik, 700, 3, EstimatorTag::Mmse).unwrap();
        assert_eq!(a, b);
    }
}
