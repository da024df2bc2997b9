//! Sparse causal effect estimation from two-sample GWAS summary statistics.
//!
//! This crate implements the spaceTSIV family of estimators: instrumental
//! variable estimation of a sparse causal effect vector when the
//! SNP–outcome and SNP–covariate associations come from two separate
//! studies and only summary statistics are available.
//!
//! The main pieces are
//!
//! - [`sumstats`]: data model for marginal and joint reduced-form summary
//!   statistics, the exact marginal-to-joint conversion, file ingestion,
//!   and first-stage instrument selection;
//! - [`qstat`]: the two-sample Q statistic, support-restricted minimization
//!   by iterated GMM, the level-α acceptance test, and the one-sample
//!   Anderson–Rubin statistic;
//! - [`estimators`]: spaceTSIV with L0 (subset enumeration) and L1
//!   (coordinate descent + refit) penalization, the plain TSIV
//!   pseudo-inverse estimator, and test-inversion confidence intervals;
//! - [`identifiability`]: rank/image diagnostics for sparse
//!   identifiability of a candidate parent set;
//! - [`simulate`]: linear-SCM simulation harness and evaluation metrics.

pub mod chi2;
pub mod error;
pub mod estimators;
pub mod identifiability;
pub mod qstat;
pub mod simulate;
pub mod sumstats;

mod combin;
mod linalg;
mod optim;

pub use error::{Error, Result};
pub use estimators::{
    ci_by_inversion, default_lambda_path, spacetsiv_l0, spacetsiv_l1, tsiv, tsiv_l1_solve,
    ConfidenceInterval, Decision, SpaceTsivResult, TrajectoryStep,
};
pub use qstat::{
    ar_statistic, fit_restricted, level_test, q_statistic, sigma_pi_of_beta, FitResult, SupportSet,
};
pub use sumstats::{
    first_stage_f, joint_from_individual, marginal_from_individual, marginal_to_joint,
    select_instruments, JointSummaryStats, MarginalSummaryStats,
};
