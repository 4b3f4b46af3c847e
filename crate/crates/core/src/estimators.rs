//! Estimators of the prior-informed, data-informed and total Bayesian
//! information, and the bound `V_B = pinv(J_B)`.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_pinv, InfoMatrix, OuterAccumulator};
use crate::net::{chunks, EVAL_CHUNK};
use crate::problems::{LikelihoodModel, PhaseOffsetLikelihood, Problem};
use crate::rng::{derive_seed, derived_rng};
use crate::score::{check_cols, ScoreModel};

/// Condition numbers of `J_B` above this are logged.
pub const ILL_CONDITIONED: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreSource {
    TrainedScore,
    OracleScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JdMethod {
    JdAnalytic,
    JdMc,
    JdPhase,
}

/// A data-informed term with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct JdEstimate {
    pub jd: InfoMatrix,
    pub method: JdMethod,
    pub m_used: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcrbEstimate {
    pub jp: InfoMatrix,
    pub jd: InfoMatrix,
    pub jb: InfoMatrix,
    pub vb: InfoMatrix,
    pub n_used: usize,
    pub m_used: Option<usize>,
    pub score_source: ScoreSource,
    pub jd_method: JdMethod,
    /// `lambda_max / lambda_min` of `jb`; `None` when `jb` is singular.
    pub condition_number: Option<f64>,
}

impl BcrbEstimate {
    /// `jb = jp + jd`, `vb = pinv(jb)`.
    pub fn assemble(
        jp: InfoMatrix,
        jd: JdEstimate,
        n_used: usize,
        score_source: ScoreSource,
    ) -> Result<Self> {
        let jb = jp.add(&jd.jd)?;
        let vb = sym_pinv(&jb, None)?;
        let eig = jb.eigen();
        let lo = eig.values[0];
        let hi = eig.values[eig.values.len() - 1];
        let condition_number = (lo > 0.0).then(|| hi / lo);
        match condition_number {
            Some(c) if c <= ILL_CONDITIONED => {}
            _ => log::warn!("J_B is ill-conditioned (eigenvalues {lo:e} .. {hi:e})"),
        }
        Ok(Self {
            jp,
            jd: jd.jd,
            jb,
            vb,
            n_used,
            m_used: jd.m_used,
            score_source,
            jd_method: jd.method,
            condition_number,
        })
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition_number.is_none_or(|c| c > ILL_CONDITIONED)
    }
}

fn nonempty(samples: ArrayView2<'_, f64>) -> Result<()> {
    if samples.nrows() == 0 {
        Err(Error::EmptySampleSet)
    } else {
        Ok(())
    }
}

/// Runs `f` over fixed-size row chunks in parallel and merges the partial
/// sums in chunk order.
fn chunked_outer<F>(samples: ArrayView2<'_, f64>, dim: usize, f: F) -> Result<InfoMatrix>
where
    F: Fn(usize, ArrayView2<'_, f64>) -> Result<OuterAccumulator> + Sync,
{
    let parts: Vec<_> = chunks(samples)
        .into_par_iter()
        .enumerate()
        .map(|(c, rows)| f(c, rows))
        .collect();
    let mut acc = OuterAccumulator::new(dim);
    for p in parts {
        acc.merge(&p?)?;
    }
    acc.finish()
}

/// `(1/N) sum_i s(x_i) s(x_i)^T`.
pub fn estimate_jp<S: ScoreModel + ?Sized>(score: &S, samples: ArrayView2<'_, f64>) -> Result<InfoMatrix> {
    nonempty(samples)?;
    check_cols(samples, score.dim())?;
    chunked_outer(samples, score.dim(), |_, rows| {
        let s = score.score_batch(rows)?;
        let mut acc = OuterAccumulator::new(score.dim());
        acc.push_rows(s.view())?;
        Ok(acc)
    })
}

/// `(1/N) sum_i J_F(x_i)` for a closed-form Fisher information.
pub fn estimate_jd_analytic<F>(fisher: F, samples: ArrayView2<'_, f64>) -> Result<InfoMatrix>
where
    F: Fn(ArrayView1<'_, f64>) -> Result<InfoMatrix>,
{
    nonempty(samples)?;
    let d = samples.ncols();
    let mut sum = Array2::<f64>::zeros((d, d));
    for x in samples.outer_iter() {
        let j = fisher(x)?;
        if j.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: j.dim() });
        }
        sum += j.as_array();
    }
    InfoMatrix::new(sum / samples.nrows() as f64)
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::InvalidArgument("M must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Monte-Carlo `J_D`: for each `x_i`, `M` fresh observations from
/// `p(y | x_i)` and the mean outer product of their likelihood scores.
/// Sample `i` draws from its own stream derived from `(seed, i)`.
pub fn estimate_jd_mc<L: LikelihoodModel>(
    lik: &L,
    samples: ArrayView2<'_, f64>,
    m: usize,
    seed: u64,
) -> Result<InfoMatrix> {
    check_m(m)?;
    nonempty(samples)?;
    check_cols(samples, lik.dim())?;
    let d = lik.dim();
    chunked_outer(samples, d, |c, rows| {
        let mut acc = OuterAccumulator::new(d);
        for (k, x) in rows.outer_iter().enumerate() {
            let i = (c * EVAL_CHUNK + k) as u64;
            let mut rng = derived_rng(seed, "jd-mc", &[i]);
            for _ in 0..m {
                let y = lik.sample_y(x, &mut rng);
                acc.push(lik.score(&y, x).view())?;
            }
        }
        Ok(acc)
    })
}

/// Scalar-times-identity `J_D` for the phase model:
/// `-(1 / (M N D)) sum_{j,i,d} d^2 log p(y_d^{ij} | x_d^i) / dx_d^2`.
pub fn estimate_jd_phase(
    lik: &PhaseOffsetLikelihood,
    samples: ArrayView2<'_, f64>,
    m: usize,
    seed: u64,
) -> Result<InfoMatrix> {
    check_m(m)?;
    nonempty(samples)?;
    check_cols(samples, lik.dim())?;
    let parts: Vec<f64> = chunks(samples)
        .into_par_iter()
        .enumerate()
        .map(|(c, rows)| {
            let mut total = 0.0;
            for (k, x) in rows.outer_iter().enumerate() {
                let i = (c * EVAL_CHUNK + k) as u64;
                let mut rng = derived_rng(seed, "jd-phase", &[i]);
                for _ in 0..m {
                    let y = lik.sample_y(x, &mut rng);
                    for (yd, &xd) in y.iter().zip(x.iter()) {
                        total -= lik.d2(*yd, xd);
                    }
                }
            }
            total
        })
        .collect();
    let count = (m * samples.nrows() * lik.dim()) as f64;
    let scalar = parts.iter().sum::<f64>() / count;
    Ok(InfoMatrix::scaled_identity(lik.dim(), scalar))
}

/// The problem's own `J_D` estimator: analytic for Gaussian denoising,
/// the scalar second-derivative estimator for the phase model.
pub fn estimate_jd_preferred(problem: &Problem, samples: ArrayView2<'_, f64>, seed: u64) -> Result<JdEstimate> {
    match problem {
        Problem::MixtureDenoise { likelihood, .. } => {
            let fisher = likelihood.fisher_matrix();
            let jd = estimate_jd_analytic(|_| Ok(fisher.clone()), samples)?;
            Ok(JdEstimate { jd, method: JdMethod::JdAnalytic, m_used: None })
        }
        Problem::PhaseOffset { likelihood, jd_m, .. } => {
            let jd = estimate_jd_phase(likelihood, samples, *jd_m, seed)?;
            Ok(JdEstimate { jd, method: JdMethod::JdPhase, m_used: Some(*jd_m) })
        }
    }
}

/// Full pipeline on given prior samples with a given score.
pub fn estimate_bcrb<S: ScoreModel + ?Sized>(
    problem: &Problem,
    score: &S,
    source: ScoreSource,
    samples: ArrayView2<'_, f64>,
    seed: u64,
) -> Result<BcrbEstimate> {
    let jp = estimate_jp(score, samples)?;
    let jd = estimate_jd_preferred(problem, samples, derive_seed(seed, "jd", &[]))?;
    BcrbEstimate::assemble(jp, jd, samples.nrows(), source)
}

/// Oracle-score estimate on `n_oracle` fresh prior samples, used as the
/// reference the trained estimates are compared against.
pub fn ground_truth_reference(problem: &Problem, n_oracle: usize, seed: u64) -> Result<BcrbEstimate> {
    if n_oracle == 0 {
        return Err(Error::EmptySampleSet);
    }
    let samples = problem.sample_prior(n_oracle, derive_seed(seed, "reference-samples", &[]));
    estimate_bcrb(
        problem,
        problem.oracle_score(),
        ScoreSource::OracleScore,
        samples.view(),
        derive_seed(seed, "reference", &[]),
    )
}
