use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use bcrb_core::estimators::{estimate_bcrb, ground_truth_reference};
use bcrb_core::harness::experiments::relative_errors;
use bcrb_core::harness::{run_checks, run_experiment, ExperimentConfig, ExperimentKind};
use bcrb_core::rng::derive_seed;
use bcrb_core::train::train_score_model;
use bcrb_core::{Checkpoint, Error, ScoreSource};

#[derive(Parser)]
#[command(name = "bcrb", version, about = "Bayesian Cramer-Rao bounds from prior samples")]
struct Cli {
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gradient, identity and oracle check suite.
    Check,
    /// Train one score network and write its checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dataset size; defaults to the first entry of `n_values`.
        #[arg(long)]
        n: Option<usize>,
        /// Which seed of the config's `seeds` list to use.
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
    },
    /// Estimate the bound with a trained checkpoint; prints JSON.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
    },
    /// Run one of the four experiments and write CSV and JSON reports.
    Experiment {
        kind: Kind,
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    DenoiseN,
    DenoiseSnr,
    PhaseN,
    PhaseSnr,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::DenoiseN => ExperimentKind::DenoiseN,
            Kind::DenoiseSnr => ExperimentKind::DenoiseSnr,
            Kind::PhaseN => ExperimentKind::PhaseN,
            Kind::PhaseSnr => ExperimentKind::PhaseSnr,
        }
    }
}

enum Failure {
    Checks,
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Dataset size and seed for a single-cell command.
fn pick_cell(cfg: &ExperimentConfig, n: Option<usize>, seed_index: usize) -> Result<(usize, u64), Failure> {
    let n = n.unwrap_or(cfg.n_values[0]);
    let seed = *cfg.seeds.get(seed_index).ok_or_else(|| {
        Failure::Config(format!("seed_index {seed_index} out of range for {} seeds", cfg.seeds.len()))
    })?;
    if n > cfg.oracle_n {
        return Err(Failure::Config(format!("n ({n}) exceeds oracle_n ({})", cfg.oracle_n)));
    }
    Ok((n, seed))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check => {
            let summary = run_checks();
            println!("{summary}");
            if summary.all_passed() {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
        Command::Train { config, out, n, seed_index } => {
            let cfg = load_config(&config, cli.seed)?;
            let (n, seed) = pick_cell(&cfg, n, seed_index)?;
            let problem = cfg.problem.build()?;
            let data = problem.sample_prior(n, derive_seed(cfg.seed, "data", &[n as u64, seed]));
            let plan = cfg.train_plan();
            let tier = plan.for_n(n)?;
            let mut train = tier.train.clone();
            train.seed = derive_seed(cfg.seed, "train", &[n as u64, seed]);
            train.validate()?;
            let (net, report) = train_score_model(data.view(), &tier.arch, &train)?;

            fs::create_dir_all(&out)
                .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
            let meta = json!({
                "n": n,
                "seed": seed,
                "master_seed": cfg.seed,
                "config_hash": cfg.hash(),
                "arch": tier.arch,
                "train": train,
                "best_step": report.best_step,
                "best_val_loss": report.best_val_loss,
            });
            net.to_checkpoint(train.seed, meta).save(&out.join("checkpoint.json"))?;
            report.write_val_history(&out.join("val_history.csv"))?;
            let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
            write_file(&out.join("train_report.json"), &text)?;
            println!(
                "trained n={n} seed={seed}: best step {} of {}, validation loss {}",
                report.best_step, report.steps_run, report.best_val_loss
            );
            Ok(())
        }
        Command::Estimate { config, checkpoint, n, seed_index } => {
            let cfg = load_config(&config, cli.seed)?;
            let (n, seed) = pick_cell(&cfg, n, seed_index)?;
            let problem = cfg.problem.build()?;
            let net = Checkpoint::load(&checkpoint)?.to_net()?;
            if net.input_dim() != problem.dim() {
                return Err(Failure::Config(format!(
                    "checkpoint input dimension {} does not match the problem's {}",
                    net.input_dim(),
                    problem.dim()
                )));
            }
            let data = problem.sample_prior(n, derive_seed(cfg.seed, "data", &[n as u64, seed]));
            let est_seed = derive_seed(cfg.seed, "estimate", &[n as u64, seed]);
            let trained = estimate_bcrb(&problem, &net, ScoreSource::TrainedScore, data.view(), est_seed)?;
            let oracle = estimate_bcrb(&problem, problem.oracle_score(), ScoreSource::OracleScore, data.view(), est_seed)?;
            let reference = ground_truth_reference(&problem, cfg.oracle_n, derive_seed(cfg.seed, "reference", &[]))?;
            let out = json!({
                "n": n,
                "seed": seed,
                "config_hash": cfg.hash(),
                "trained": trained,
                "oracle": oracle,
                "reference": reference,
                "rel_err_trained": relative_errors(&trained, &reference)?,
                "rel_err_oracle": relative_errors(&oracle, &reference)?,
            });
            println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
            Ok(())
        }
        Command::Experiment { kind, config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let report = run_experiment(kind.into(), &cfg)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let (csv, json) = report.write(&dir)?;
            for row in report.failures() {
                eprintln!(
                    "failed: {} n={} snr={} seed={}: {}",
                    row.figure,
                    row.n,
                    row.snr_db,
                    row.seed,
                    row.failed.as_deref().unwrap_or("")
                );
            }
            println!("wrote {} and {}", csv.display(), json.display());
            Ok(())
        }
    }
}
