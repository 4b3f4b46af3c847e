use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate_bcrb, ground_truth_reference, BcrbEstimate, ScoreSource};
use crate::harness::config::{ExperimentConfig, TrainPlan};
use crate::harness::report::{ExperimentReport, RelErrors, ReportRow, RmseTriple};
use crate::linalg::{rel_error, Norm};
use crate::net::MlpScoreNet;
use crate::problems::{tau_n2_from_snr, Problem, ProblemPreset, DEFAULT_MIXTURE_SNR_DB};
use crate::reference::{bound_rmse, map_denoise_with, rmse_on_pairs, sample_pairs, EstimatorTag, MmseDenoiser};
use crate::rng::derive_seed;
use crate::train::train_score_model;

/// The four experiments the CLI can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DenoiseN,
    DenoiseSnr,
    PhaseN,
    PhaseSnr,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DenoiseN => "denoise-n",
            ExperimentKind::DenoiseSnr => "denoise-snr",
            ExperimentKind::PhaseN => "phase-n",
            ExperimentKind::PhaseSnr => "phase-snr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::DenoiseN, Self::DenoiseSnr, Self::PhaseN, Self::PhaseSnr]
            .into_iter()
            .find(|k| k.name() == s)
    }

    fn figure(self) -> &'static str {
        match self {
            ExperimentKind::DenoiseN => "fig1",
            ExperimentKind::DenoiseSnr => "fig2",
            ExperimentKind::PhaseN => "fig3",
            ExperimentKind::PhaseSnr => "fig4",
        }
    }

    fn preset(self) -> ProblemPreset {
        match self {
            ExperimentKind::DenoiseN | ExperimentKind::DenoiseSnr => ProblemPreset::MixtureDenoise,
            ExperimentKind::PhaseN | ExperimentKind::PhaseSnr => ProblemPreset::PhaseOffset,
        }
    }
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match kind {
        ExperimentKind::DenoiseN => run_denoise_convergence(cfg),
        ExperimentKind::DenoiseSnr => run_denoise_snr(cfg),
        ExperimentKind::PhaseN => run_phase_convergence(cfg),
        ExperimentKind::PhaseSnr => run_phase_snr(cfg),
    }
}

/// Relative errors of `jp`, `jb` and `vb` against the reference.
pub fn relative_errors(est: &BcrbEstimate, reference: &BcrbEstimate) -> Result<RelErrors> {
    let e = |a, b, norm| rel_error(a, b, norm);
    Ok(RelErrors {
        jp: e(&est.jp, &reference.jp, Norm::Spectral)?,
        jb: e(&est.jb, &reference.jb, Norm::Spectral)?,
        vb: e(&est.vb, &reference.vb, Norm::Spectral)?,
        jp_fro: e(&est.jp, &reference.jp, Norm::Frobenius)?,
        jb_fro: e(&est.jb, &reference.jb, Norm::Frobenius)?,
        vb_fro: e(&est.vb, &reference.vb, Norm::Frobenius)?,
    })
}

/// Dataset sizes × seeds, trained and oracle rows per cell.
pub fn run_denoise_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_convergence(ExperimentKind::DenoiseN, cfg)
}

pub fn run_phase_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_convergence(ExperimentKind::PhaseN, cfg)
}

/// SNR sweep at fixed `n` with MMSE, MAP and bound RMSEs per SNR.
pub fn run_denoise_snr(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let problem = checked_problem(ExperimentKind::DenoiseSnr, cfg)?;
    if cfg.snr_values_db.is_empty() {
        return Err(Error::Config("snr_values_db must not be empty".into()));
    }
    let points: Vec<(f64, Problem)> = cfg
        .snr_values_db
        .iter()
        .map(|&s| Ok((s, problem.with_snr(s)?)))
        .collect::<Result<_>>()?;
    run_snr_sweep(ExperimentKind::DenoiseSnr, cfg, &problem, points)
}

/// Phase-noise sweep; uses `tau_n2_values` when given, else `snr_values_db`.
pub fn run_phase_snr(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let problem = checked_problem(ExperimentKind::PhaseSnr, cfg)?;
    let variances: Vec<f64> = match &cfg.tau_n2_values {
        Some(v) => v.clone(),
        None => cfg.snr_values_db.iter().map(|&s| tau_n2_from_snr(s)).collect(),
    };
    if variances.is_empty() {
        return Err(Error::Config("phase-snr needs tau_n2_values or snr_values_db".into()));
    }
    let points: Vec<(f64, Problem)> = variances
        .iter()
        .map(|&t| {
            let p = problem.with_phase_noise(t)?;
            Ok((p.snr_db(), p))
        })
        .collect::<Result<_>>()?;
    run_snr_sweep(ExperimentKind::PhaseSnr, cfg, &problem, points)
}

fn checked_problem(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Problem> {
    cfg.validate()?;
    if cfg.problem.preset != kind.preset() {
        return Err(Error::Config(format!(
            "{} needs problem preset {:?}, got {:?}",
            kind.name(),
            kind.preset().name(),
            cfg.problem.preset.name()
        )));
    }
    cfg.problem.build()
}

/// The configured SNR when the noise was set through it, else the SNR implied
/// by the noise parameters.
fn nominal_snr(cfg: &ExperimentConfig, problem: &Problem) -> f64 {
    let p = &cfg.problem;
    match (p.snr_db, p.tau, p.tau_n2, problem) {
        (Some(s), None, None, _) => s,
        (None, None, None, Problem::MixtureDenoise { .. }) => DEFAULT_MIXTURE_SNR_DB,
        _ => problem.snr_db(),
    }
}

fn data_seed(cfg: &ExperimentConfig, n: usize, seed: u64) -> u64 {
    derive_seed(cfg.seed, "data", &[n as u64, seed])
}

fn train_net(plan: &TrainPlan, cfg: &ExperimentConfig, data: &Array2<f64>, seed: u64) -> Result<MlpScoreNet> {
    let n = data.nrows();
    let tier = plan.for_n(n)?;
    let mut train = tier.train.clone();
    train.seed = derive_seed(cfg.seed, "train", &[n as u64, seed]);
    let (net, report) = train_score_model(data.view(), &tier.arch, &train)?;
    log::info!(
        "trained n={n} seed={seed}: best step {} of {}, val loss {:.4}",
        report.best_step,
        report.steps_run,
        report.best_val_loss
    );
    Ok(net)
}

/// Fills a row from an estimate, or marks it failed.
fn fill_row(row: &mut ReportRow, est: Result<BcrbEstimate>, reference: &BcrbEstimate) -> Option<BcrbEstimate> {
    match est.and_then(|e| Ok((relative_errors(&e, reference)?, e))) {
        Ok((rel, e)) => {
            row.rel = Some(rel);
            row.jd_scalar_identity = Some(e.jd.as_scalar_identity().is_some());
            row.condition_number = e.condition_number;
            Some(e)
        }
        Err(err) => {
            log::warn!("{} n={} seed={} failed: {err}", row.figure, row.n, row.seed);
            row.failed = Some(err.to_string());
            None
        }
    }
}

fn run_convergence(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let problem = checked_problem(kind, cfg)?;
    let hash = cfg.hash();
    let plan = cfg.train_plan();
    let snr = nominal_snr(cfg, &problem);
    let reference = ground_truth_reference(&problem, cfg.oracle_n, derive_seed(cfg.seed, "reference", &[]))?;
    let fig = kind.figure();

    let cells: Vec<(usize, u64)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let rows: Vec<ReportRow> = cells
        .par_iter()
        .flat_map_iter(|&(n, seed)| {
            let start = Instant::now();
            let data = problem.sample_prior(n, data_seed(cfg, n, seed));
            let est_seed = derive_seed(cfg.seed, "estimate", &[n as u64, seed]);

            let mut oracle = ReportRow::new(&format!("{fig}-oracle"), n, snr, seed, &hash);
            let oracle_est = estimate_bcrb(&problem, problem.oracle_score(), ScoreSource::OracleScore, data.view(), est_seed);
            fill_row(&mut oracle, oracle_est, &reference);

            let mut trained = ReportRow::new(&format!("{fig}-trained"), n, snr, seed, &hash);
            let est = train_net(&plan, cfg, &data, seed)
                .and_then(|net| estimate_bcrb(&problem, &net, ScoreSource::TrainedScore, data.view(), est_seed));
            fill_row(&mut trained, est, &reference);
            if cfg.emit_wall_time {
                trained.wall_time_s = Some(start.elapsed().as_secs_f64());
            }
            [oracle, trained]
        })
        .collect();
    Ok(ExperimentReport::new(kind.name(), cfg, rows))
}

/// MMSE and MAP RMSEs on one shared set of joint draws.
fn denoiser_rmse(problem: &Problem, cfg: &ExperimentConfig, snr: f64) -> Result<(f64, f64, f64, f64)> {
    let Problem::MixtureDenoise { prior, likelihood } = problem else {
        return Err(Error::InvalidArgument("RMSE columns need the denoising problem".into()));
    };
    let (xs, ys) = sample_pairs(prior, likelihood, cfg.rmse_pairs, derive_seed(cfg.seed, "pairs", &[snr.to_bits()]))?;
    let mmse = MmseDenoiser::new(prior, likelihood.tau())?;
    let r_mmse = rmse_on_pairs(|y| mmse.denoise(y), xs.view(), ys.view(), EstimatorTag::Mmse)?;
    let r_map = rmse_on_pairs(
        |y| Ok(map_denoise_with(y, prior, &mmse, &cfg.map)?.x),
        xs.view(),
        ys.view(),
        EstimatorTag::Map,
    )?;
    Ok((r_mmse.rmse, r_mmse.std_err, r_map.rmse, r_map.std_err))
}

/// Trains once per seed at `snr_n` (the prior does not depend on the noise)
/// and evaluates every noise level with the same networks.
fn run_snr_sweep(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    problem: &Problem,
    points: Vec<(f64, Problem)>,
) -> Result<ExperimentReport> {
    let hash = cfg.hash();
    let plan = cfg.train_plan();
    let n = cfg.snr_n();
    let fig = kind.figure();
    let with_rmse = kind == ExperimentKind::DenoiseSnr;

    let trained: Vec<(u64, Array2<f64>, Result<MlpScoreNet>, f64)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let start = Instant::now();
            let data = problem.sample_prior(n, data_seed(cfg, n, seed));
            let net = train_net(&plan, cfg, &data, seed);
            (seed, data, net, start.elapsed().as_secs_f64())
        })
        .collect();

    let per_point: Vec<Result<Vec<ReportRow>>> = points
        .par_iter()
        .map(|(snr, p)| {
            let reference = ground_truth_reference(p, cfg.oracle_n, derive_seed(cfg.seed, "reference", &[]))?;
            let rmse = if with_rmse { Some(denoiser_rmse(p, cfg, *snr)?) } else { None };
            let triple = |bound: f64| {
                rmse.map(|(mmse, mmse_se, map, map_se)| RmseTriple { mmse, mmse_se, map, map_se, bound })
            };
            let mut rows = Vec::with_capacity(2 * trained.len());
            for (seed, data, net, train_time) in &trained {
                let start = Instant::now();
                let est_seed = derive_seed(cfg.seed, "estimate", &[n as u64, *seed]);

                let mut oracle = ReportRow::new(&format!("{fig}-oracle"), n, *snr, *seed, &hash);
                let est = estimate_bcrb(p, p.oracle_score(), ScoreSource::OracleScore, data.view(), est_seed);
                if let Some(e) = fill_row(&mut oracle, est, &reference) {
                    oracle.rmse = triple(bound_rmse(&e.vb).rmse);
                }

                let mut row = ReportRow::new(&format!("{fig}-trained"), n, *snr, *seed, &hash);
                let est = match net {
                    Ok(net) => estimate_bcrb(p, net, ScoreSource::TrainedScore, data.view(), est_seed),
                    Err(e) => Err(Error::Config(format!("training failed: {e}"))),
                };
                if let Some(e) = fill_row(&mut row, est, &reference) {
                    row.rmse = triple(bound_rmse(&e.vb).rmse);
                }
                if cfg.emit_wall_time {
                    row.wall_time_s = Some(train_time + start.elapsed().as_secs_f64());
                }
                rows.push(oracle);
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(ExperimentReport::new(kind.name(), cfg, rows))
}
