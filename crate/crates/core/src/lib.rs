//! Bayesian Cramer-Rao bound estimation from prior samples.
//!
//! The prior-informed part of the Bayesian information is estimated from the
//! outer products of a learned prior score, the score itself being a
//! feedforward network fitted by exact score matching. The data-informed part
//! comes from the known likelihood, either analytically or by Monte Carlo.

pub mod error;
pub mod estimators;
pub mod gradcheck;
pub mod harness;
pub mod linalg;
pub mod net;
pub mod problems;
pub mod reference;
pub mod rng;
pub mod score;
pub mod train;

pub use error::{Error, Result};
pub use estimators::{BcrbEstimate, JdMethod, ScoreSource};
pub use harness::{ExperimentConfig, ExperimentReport};
pub use linalg::{InfoMatrix, Norm};
pub use net::{Activation, Checkpoint, MlpScoreNet, ParamGrad};
pub use problems::{Prior, Problem, ProblemSpec};
pub use score::{FnScore, ScoreModel};
