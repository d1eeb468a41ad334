//! Continuation (Newton-Krylov) nonlinear model predictive control.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense pivoted LU and unrestarted matrix-free GMRES.
//! - [`ocp`]: discretized receding-horizon machinery (rollout, costates,
//!   optimality residual, performance index) over an [`ocp::OcpProblem`].
//! - [`continuation`]: the per-sample Newton-Krylov update, Jacobian
//!   approximation, preconditioner refresh and horizon initialization.
//! - [`particle`]: ensemble solves over the dynamics variants of a problem
//!   and minimum-cost selection.
//! - [`min_time`]: the planar minimum-time problem with a banded heading.
//! - [`sim`]: closed-loop driver, config parsing and CSV output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod error;
pub mod linalg;
pub mod min_time;
pub mod ocp;
pub mod particle;
pub mod sim;

pub use error::{Result, SolverError};
