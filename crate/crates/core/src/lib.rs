//! Optimal data recommendation under a minimum average revenue constraint.
//!
//! Given a utility distribution `U` over data classes and per-push revenue
//! constants, the recommendation distribution closest to `U` in relative
//! entropy that still meets a revenue target is an exponential tilt of `U`.
//! This crate computes it, along with the surrounding structural analysis,
//! a brute-force oracle and a Monte-Carlo simulator.

pub mod analysis;
pub mod error;
pub mod mim;
pub mod optimizer;
pub mod oracle;
pub mod prob;
pub mod revenue;
pub mod simulator;

pub use error::{Error, Extremum, Result};
pub use mim::{f, g, g_derivative, log_total_weight, mim_weight, normalized_mim, ImportanceCoefficient};
pub use optimizer::{
    classify_regime, optimal_distribution, solve_varpi, verify_kkt, CaseId, KktReport, RegimeCase,
    SolveResult,
};
pub use prob::{entropy, gamma, kl_divergence, make_prob_vector, LogBase, Pmf, ProbVector};
pub use revenue::{
    alpha, expected_revenue, revenue_matrix, system_kind, thresholds, RevenueParams, SystemKind,
    Thresholds,
};
