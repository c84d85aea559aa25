//! Stochastic second-order optimization for finite-sum problems.
//!
//! This crate implements two outer loops over inexact oracles:
//!
//! * a trust-region method whose radius is adapted from a *subsampled*
//!   objective ratio ([`optim::run_trust_region`]), and
//! * an adaptive cubic-regularization method whose penalty is adapted the
//!   same way ([`optim::run_cubic_reg`]).
//!
//! Both accept independently inexact function values, gradients, and
//! Hessian operators. On a finite sum `f(x) = (1/n) Σ f_i(x)` the inexact
//! quantities are means over uniformly drawn index subsets `S_h`, `S_g`,
//! and `S_B` ([`sampling`]), and the per-sample work is accounted in
//! propagation units ([`props`]).
//!
//! The inner subproblems (truncated CG for the trust region, a certified
//! Cauchy-plus-refinement scheme for the cubic model, Lanczos for negative
//! curvature) live in [`solvers`]. Brute-force and finite-difference
//! reference oracles used to validate the solvers are shipped in
//! [`oracle`] so that a binary can run the same battery as the test suite.

pub mod data;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod problem;
pub mod props;
pub mod sampling;
pub mod solvers;
pub mod sparse;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty problem: at least one sample is required")]
    EmptyProblem,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("sample size {size} exceeds population {n}")]
    SampleTooLarge { size: usize, n: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
