use std::fmt;
use std::time::Instant;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::estimators::{estimate_jd_mc, estimate_jd_phase, estimate_jp};
use crate::gradcheck::{finite_difference_jacobian, gradient_check};
use crate::harness::config::{ExperimentConfig, TrainPlan, TrainTier};
use crate::harness::experiments::run_denoise_convergence;
use crate::linalg::{jacobi_eigen, pinv_array, rel_error, InfoMatrix, Norm};
use crate::net::{Activation, MlpScoreNet};
use crate::problems::{
    paper_mixture, GaussianDenoisingLikelihood, LikelihoodModel, PhaseOffsetLikelihood, Prior, ProblemPreset,
    WienerPhasePrior,
};
use crate::reference::{map_denoise_with, AscentConfig, MmseDenoiser};
use crate::rng::{derived_rng, rng_from_seed, SimRng};
use crate::score::{FnScore, ScoreModel};
use crate::train::{ArchSpec, BatchSize, SplitRule, TrainConfig};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub results: Vec<CheckResult>,
}

impl CheckSummary {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> Vec<&CheckResult> {
        self.results.iter().filter(|r| !r.passed).collect()
    }
}

impl fmt::Display for CheckSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            let tag = if r.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {:<28} {:>7.2}s  {}", r.name, r.seconds, r.detail)?;
        }
        let passed = self.results.iter().filter(|r| r.passed).count();
        write!(f, "{passed}/{} checks passed", self.results.len())
    }
}

/// A check returns whether it passed and a one-line measurement.
type Check = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("activation-derivatives", activation_derivatives),
    ("input-jacobian-fd", input_jacobian_fd),
    ("jacobian-trace", jacobian_trace),
    ("sm-grad-fd", sm_grad_fd),
    ("sm-grad-fd-bias", sm_grad_fd_bias),
    ("gradcheck-canary", gradcheck_canary),
    ("hyvarinen-identity", hyvarinen_identity),
    ("penrose-conditions", penrose_conditions),
    ("jacobi-eigen", jacobi_reconstruction),
    ("mixture-score-fd", mixture_score_fd),
    ("wiener-score-exact", wiener_score_exact),
    ("phase-likelihood-fd", phase_likelihood_fd),
    ("phase-sign-symmetry", phase_sign_symmetry),
    ("denoise-fisher-mc", denoise_fisher_mc),
    ("jd-phase-vs-mc", jd_phase_vs_mc),
    ("oracle-jp", oracle_jp),
    ("mmse-importance", mmse_importance),
    ("map-stationarity", map_stationarity),
    ("csv-determinism", csv_determinism),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

pub fn run_checks() -> CheckSummary {
    let results = CHECKS
        .iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
        })
        .collect();
    CheckSummary { results }
}

fn normal_matrix(rows: usize, cols: usize, sd: f64, rng: &mut SimRng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| sd * rng.sample::<f64, _>(StandardNormal))
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Random net of depth <= 5, width <= 16 and input dimension <= 8.
fn random_net(rng: &mut SimRng, bias: bool) -> Result<MlpScoreNet> {
    let dim = rng.random_range(1..=8);
    let depth = rng.random_range(1..=5);
    let mut dims = vec![dim];
    for _ in 1..depth {
        dims.push(rng.random_range(1..=16));
    }
    dims.push(dim);
    let act = [Activation::Softplus, Activation::Tanh, Activation::ShiftedSoftplus][rng.random_range(0..3)];
    let mut net = MlpScoreNet::init_with_bias(&dims, act, Activation::Identity, bias, rng.random())?;
    if bias {
        let depth = net.depth();
        for p in &mut net.params_mut()[depth..] {
            p.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
    }
    Ok(net)
}

pub fn activation_derivatives() -> Result<(bool, String)> {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for act in [Activation::Softplus, Activation::ShiftedSoftplus, Activation::Tanh, Activation::Identity] {
        for i in 0..=80 {
            let z = -8.0 + 0.2 * i as f64;
            let d1 = (act.value(z + h) - act.value(z - h)) / (2.0 * h);
            let d2 = (act.d1(z + h) - act.d1(z - h)) / (2.0 * h);
            worst = worst
                .max((d1 - act.d1(z)).abs() / act.d1(z).abs().max(1e-3))
                .max((d2 - act.d2(z)).abs() / act.d2(z).abs().max(1e-3));
        }
    }
    Ok((worst < 1e-6, format!("max rel err {worst:.2e}")))
}

fn jacobian_errors(bias: bool) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(11);
    let (mut jac_err, mut tr_err) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let net = random_net(&mut rng, bias)?;
        let x = Array1::from_shape_fn(net.input_dim(), |_| rng.sample::<f64, _>(StandardNormal));
        let fd = finite_difference_jacobian(&net, x.view(), 1e-6)?;
        let an = net.input_jacobian(x.view())?;
        let scale = max_abs(&fd).max(1.0);
        jac_err = jac_err.max(max_abs(&(&an - &fd)) / scale);
        let tr = net.jacobian_trace(x.view())?;
        tr_err = tr_err.max((tr - fd.diag().sum()).abs() / fd.diag().sum().abs().max(1.0));
    }
    Ok((jac_err, tr_err))
}

pub fn input_jacobian_fd() -> Result<(bool, String)> {
    let (jac, _) = jacobian_errors(true)?;
    Ok((jac < 1e-6, format!("max rel err {jac:.2e} over 20 nets")))
}

pub fn jacobian_trace() -> Result<(bool, String)> {
    let (_, tr) = jacobian_errors(false)?;
    Ok((tr < 1e-6, format!("max rel err {tr:.2e} over 20 nets")))
}

fn grad_errors(bias: bool, seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let net = random_net(&mut rng, bias)?;
        let batch = normal_matrix(16, net.input_dim(), 1.0, &mut rng);
        let g = net.sm_loss_grad(batch.view())?;
        worst = worst.max(gradient_check(&net, batch.view(), &g)?);
    }
    Ok(worst)
}

pub fn sm_grad_fd() -> Result<(bool, String)> {
    let e = grad_errors(false, 21)?;
    Ok((e < 1e-4, format!("max rel err {e:.2e} over 20 nets")))
}

pub fn sm_grad_fd_bias() -> Result<(bool, String)> {
    let e = grad_errors(true, 22)?;
    Ok((e < 1e-4, format!("max rel err {e:.2e} over 20 nets")))
}

/// A gradient whose trace term has the wrong sign must fail the check.
pub fn gradcheck_canary() -> Result<(bool, String)> {
    let mut rng = rng_from_seed(23);
    let net = MlpScoreNet::init(&[4, 12, 12, 4], Activation::Softplus, Activation::Identity, 5)?;
    let batch = normal_matrix(16, 4, 1.0, &mut rng);
    let (_, bad) = net.loss_and_grad_weighted(batch.view(), -1.0)?;
    let e = gradient_check(&net, batch.view(), &bad)?;
    Ok((e > 1e-2, format!("sign-flipped gradient rel err {e:.2e} (must exceed 1e-2)")))
}

/// Gap between the tractable loss plus `D/2` and the Fisher divergence to
/// the standard-normal score, in pooled standard errors, for one linear model.
pub fn hyvarinen_gap(w: &Array2<f64>, n: usize, seed: u64) -> Result<f64> {
    let d = w.nrows();
    let xs = normal_matrix(n, d, 1.0, &mut rng_from_seed(seed));
    let tr = w.diag().sum();
    let (mut l, mut l2, mut j, mut j2) = (0.0, 0.0, 0.0, 0.0);
    for x in xs.outer_iter() {
        let s = w.dot(&x);
        let li = tr + 0.5 * s.dot(&s);
        let r = &s + &x;
        let ji = 0.5 * r.dot(&r);
        l += li;
        l2 += li * li;
        j += ji;
        j2 += ji * ji;
    }
    let nf = n as f64;
    let (lm, jm) = (l / nf, j / nf);
    let var_l = (l2 / nf - lm * lm) * nf / (nf - 1.0);
    let var_j = (j2 / nf - jm * jm) * nf / (nf - 1.0);
    let pooled = ((var_l + var_j) / nf).sqrt();
    Ok(((lm + 0.5 * d as f64) - jm).abs() / pooled)
}

pub fn hyvarinen_identity() -> Result<(bool, String)> {
    let mut rng = rng_from_seed(31);
    let mut worst = 0.0f64;
    for k in 0..5 {
        let w = normal_matrix(3, 3, 0.5, &mut rng);
        worst = worst.max(hyvarinen_gap(&w, 100_000, 100 + k)?);
    }
    Ok((worst <= 3.0, format!("max gap {worst:.2} pooled std errors over 5 models")))
}

/// Random symmetric PSD matrices, every fifth one rank-deficient.
pub fn random_psd(count: usize, seed: u64) -> Vec<Array2<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|k| {
            let d = rng.random_range(2..=12);
            let rank = if k % 5 == 0 { rng.random_range(1..d) } else { d };
            let b = normal_matrix(d, rank, 1.0, &mut rng);
            let a = b.dot(&b.t());
            (&a + &a.t()) * 0.5
        })
        .collect()
}

/// Largest residual of the four Moore-Penrose conditions, relative to the
/// norms involved.
pub fn penrose_residual(a: &Array2<f64>, p: &Array2<f64>) -> f64 {
    let ap = a.dot(p);
    let pa = p.dot(a);
    let na = max_abs(a).max(1e-300);
    let np = max_abs(p).max(1e-300);
    [
        max_abs(&(&ap.dot(a) - a)) / na,
        max_abs(&(&pa.dot(p) - p)) / np,
        max_abs(&(&ap - &ap.t())),
        max_abs(&(&pa - &pa.t())),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn penrose_conditions() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for a in random_psd(50, 41) {
        let p = pinv_array(a.view(), None)?;
        worst = worst.max(penrose_residual(&a, &p));
    }
    Ok((worst < 1e-9, format!("max residual {worst:.2e} over 50 matrices")))
}

pub fn jacobi_reconstruction() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for a in random_psd(20, 42) {
        let eig = jacobi_eigen(a.view());
        let v = &eig.vectors;
        let d = a.nrows();
        let recon = v.dot(&Array2::from_diag(&eig.values)).dot(&v.t());
        let orth = max_abs(&(&v.t().dot(v) - &Array2::<f64>::eye(d)));
        worst = worst.max(max_abs(&(&recon - &a)) / max_abs(&a)).max(orth);
    }
    Ok((worst < 1e-10, format!("max reconstruction/orthogonality err {worst:.2e}")))
}

fn fd_score_error(prior: &dyn Prior, xs: &Array2<f64>) -> Result<f64> {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for x in xs.outer_iter() {
        let s = prior.score(x)?;
        for k in 0..x.len() {
            let mut xp = x.to_owned();
            let mut xm = x.to_owned();
            xp[k] += h;
            xm[k] -= h;
            let fd = (prior.logpdf(xp.view())? - prior.logpdf(xm.view())?) / (2.0 * h);
            worst = worst.max((fd - s[k]).abs() / s[k].abs().max(1.0));
        }
    }
    Ok(worst)
}

pub fn mixture_score_fd() -> Result<(bool, String)> {
    let prior = paper_mixture(0)?;
    let e = fd_score_error(&prior, &prior.sample(50, 51))?;
    Ok((e < 1e-5, format!("max rel err {e:.2e}")))
}

pub fn wiener_score_exact() -> Result<(bool, String)> {
    let prior = WienerPhasePrior::new(10, 0.2)?;
    let lam = prior.precision();
    let mut worst = 0.0f64;
    for x in prior.sample(50, 52).outer_iter() {
        let s = prior.score(x)?;
        let expected = -lam.as_array().dot(&x);
        worst = worst.max((&s - &expected).iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let fd = fd_score_error(&prior, &prior.sample(20, 53))?;
    Ok((worst < 1e-12 && fd < 1e-5, format!("max |s + Lambda x| {worst:.1e}, fd err {fd:.1e}")))
}

/// Relative errors of the phase score and second derivative against central
/// differences of the log-likelihood at 100 random points.
pub fn phase_fd_errors(seed: u64) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(seed);
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let lik = PhaseOffsetLikelihood::new(1, rng.random_range(0.05..1.0))?;
        let y = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let x: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let h1 = 1e-6;
        let fd1 = (lik.loglik_d(y, x + h1) - lik.loglik_d(y, x - h1)) / (2.0 * h1);
        let h2 = 1e-4;
        let fd2 = (lik.loglik_d(y, x + h2) - 2.0 * lik.loglik_d(y, x) + lik.loglik_d(y, x - h2)) / (h2 * h2);
        let s = lik.score_d(y, x);
        let d2 = lik.d2(y, x);
        e1 = e1.max((fd1 - s).abs() / s.abs().max(1.0));
        e2 = e2.max((fd2 - d2).abs() / d2.abs().max(1.0));
    }
    Ok((e1, e2))
}

pub fn phase_likelihood_fd() -> Result<(bool, String)> {
    let (e1, e2) = phase_fd_errors(61)?;
    Ok((e1 < 1e-5 && e2 < 1e-5, format!("score rel err {e1:.2e}, d2 rel err {e2:.2e}")))
}

/// `p(y | x) = p(-y | x)` because the symbol sign is marginalised out.
pub fn phase_sign_symmetry() -> Result<(bool, String)> {
    let lik = PhaseOffsetLikelihood::new(4, 0.2)?;
    let prior = WienerPhasePrior::new(4, 0.2)?;
    let mut rng = rng_from_seed(62);
    let mut mismatches = 0;
    for x in prior.sample(50, 63).outer_iter() {
        let y = lik.sample_y(x, &mut rng);
        let neg: Vec<Complex64> = y.iter().map(|v| -v).collect();
        if lik.loglik(&y, x) != lik.loglik(&neg, x) || lik.score(&y, x) != lik.score(&neg, x) {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} of 50 points differ")))
}

pub fn denoise_fisher_mc() -> Result<(bool, String)> {
    let lik = GaussianDenoisingLikelihood::new(3, 0.5)?;
    let xs = normal_matrix(20, 3, 1.0, &mut rng_from_seed(71));
    let mc = estimate_jd_mc(&lik, xs.view(), 2_000, 72)?;
    let e = rel_error(&mc, &lik.fisher_matrix(), Norm::Spectral)?;
    Ok((e < 0.03, format!("spectral rel err {e:.4} vs I/tau^2")))
}

/// Information equality: minus the mean second derivative against the mean
/// squared score on the diagonal of the outer-product estimator.
pub fn jd_phase_information_equality(n: usize, m: usize, seed: u64) -> Result<f64> {
    let lik = PhaseOffsetLikelihood::new(10, 0.2)?;
    let prior = WienerPhasePrior::new(10, 0.2)?;
    let xs = prior.sample(n, seed);
    let hess = estimate_jd_phase(&lik, xs.view(), m, seed + 1)?.get(0, 0);
    let outer = estimate_jd_mc(&lik, xs.view(), m, seed + 2)?;
    Ok((hess / (outer.trace() / 10.0) - 1.0).abs())
}

pub fn jd_phase_vs_mc() -> Result<(bool, String)> {
    let e = jd_phase_information_equality(1000, 10, 81)?;
    Ok((e < 0.05, format!("rel gap {e:.4}")))
}

pub fn oracle_jp() -> Result<(bool, String)> {
    let xs = normal_matrix(100_000, 3, 1.0, &mut rng_from_seed(91));
    let sn = FnScore::new(3, |x: ndarray::ArrayView1<'_, f64>| -x.to_owned());
    let e1 = rel_error(&estimate_jp(&sn, xs.view())?, &InfoMatrix::identity(3), Norm::Spectral)?;
    let prior = WienerPhasePrior::new(10, 0.2)?;
    let ws = prior.sample(100_000, 92);
    let e2 = rel_error(&estimate_jp(&prior, ws.view())?, &prior.precision(), Norm::Spectral)?;
    Ok((e1 < 0.05 && e2 < 0.05, format!("standard normal {e1:.4}, Wiener {e2:.4}")))
}

/// Closed-form posterior mean against a self-normalised importance-sampling
/// estimate that weights prior draws by the likelihood.
pub fn mmse_importance() -> Result<(bool, String)> {
    let prior = paper_mixture(0)?;
    let tau = 3.0;
    let mmse = MmseDenoiser::new(&prior, tau)?;
    let lik = GaussianDenoisingLikelihood::new(prior.dim(), tau)?;
    let draws = prior.sample(400_000, 101);
    let mut rng = derived_rng(102, "y", &[]);
    let mut worst = 0.0f64;
    for x in prior.sample(5, 103).outer_iter() {
        let y = lik.sample_y(x, &mut rng);
        let logw: Vec<f64> = draws.outer_iter().map(|d| lik.log_likelihood_unnormalised(y.view(), d)).collect();
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut est = Array1::<f64>::zeros(prior.dim());
        for (wi, d) in w.iter().zip(draws.outer_iter()) {
            est.scaled_add(*wi / total, &d);
        }
        let exact = mmse.denoise(y.view())?;
        let err = (&est - &exact).mapv(|v| v * v).sum().sqrt() / exact.mapv(|v| v * v).sum().sqrt().max(1.0);
        worst = worst.max(err);
    }
    Ok((worst < 0.05, format!("max rel err {worst:.4} vs importance sampling")))
}

pub fn map_stationarity() -> Result<(bool, String)> {
    let prior = paper_mixture(0)?;
    let mut worst = 0.0f64;
    let mut ok = true;
    for (k, tau) in [0.5, 2.0, 6.0].into_iter().enumerate() {
        let lik = GaussianDenoisingLikelihood::new(prior.dim(), tau)?;
        let mmse = MmseDenoiser::new(&prior, tau)?;
        let mut rng = derived_rng(111, "y", &[k as u64]);
        for x in prior.sample(10, 112 + k as u64).outer_iter() {
            let y = lik.sample_y(x, &mut rng);
            let r = map_denoise_with(y.view(), &prior, &mmse, &AscentConfig::default())?;
            let at = |z: &Array1<f64>| -> Result<f64> {
                Ok(prior.logpdf(z.view())? + lik.log_likelihood_unnormalised(y.view(), z.view()))
            };
            ok &= at(&r.x)? >= at(&mmse.denoise(y.view())?)? - 1e-9;
            worst = worst.max(r.grad_norm / (1.0 + r.x.dot(&r.x).sqrt()));
        }
    }
    Ok((ok && worst < 1e-6, format!("max scaled grad norm {worst:.2e}, beats MMSE point: {ok}")))
}

/// A small fixed experiment, used to confirm byte-identical reruns.
pub fn determinism_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::desk(ProblemPreset::MixtureDenoise);
    c.n_values = vec![100, 200];
    c.seeds = vec![0, 1];
    c.oracle_n = 5_000;
    c.train = Some(TrainPlan {
        tiers: vec![TrainTier {
            max_n: None,
            arch: ArchSpec::new(vec![16], Activation::Tanh).with_bias(true),
            train: TrainConfig {
                learning_rate: 1e-2,
                batch_size: BatchSize::Size(32),
                patience: 10,
                split: SplitRule::ValFraction(0.2),
                max_steps: 100,
                ..TrainConfig::default()
            },
        }],
    });
    c
}

pub fn csv_determinism() -> Result<(bool, String)> {
    let cfg = determinism_config();
    let a = run_denoise_convergence(&cfg)?.to_csv();
    let b = run_denoise_convergence(&cfg)?.to_csv();
    Ok((a == b, format!("{} bytes, identical: {}", a.len(), a == b)))
}
