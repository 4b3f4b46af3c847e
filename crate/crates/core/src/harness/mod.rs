//! Configuration-driven experiments, the check suite, and CSV reports.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod report;

pub use checks::{run_checks, CheckResult, CheckSummary};
pub use config::{ExperimentConfig, Scale, TrainPlan, TrainTier};
pub use experiments::{
    run_denoise_convergence, run_denoise_snr, run_experiment, run_phase_convergence, run_phase_snr,
    ExperimentKind,
};
pub use report::{median, ExperimentReport, RelErrors, ReportRow, RmseTriple, CSV_HEADER};
