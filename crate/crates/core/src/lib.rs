//! Adaptively scaled trust-region optimization without objective
//! evaluations.
//!
//! The [`driver`] runs the iteration on any [`oracle::Problem`] that
//! supplies gradients and Hessians (or Hessian-vector products). The
//! [`trs`] module solves the trust-region subproblem, [`measures`] computes
//! the second-order optimality measures, [`scaling`] holds the Adagrad-like
//! and divergent weight rules, and [`sharpness`] builds the
//! one-dimensional worst-case functions showing the rates are tight.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod measures;
pub mod oracle;
pub mod scaling;
pub mod trs;
pub mod verify;
pub mod driver;
pub mod sharpness;
pub mod trace;
pub mod cli;

pub use driver::{run, Astr2Config, IterateRecord, Trace};
pub use error::{Error, Result};
pub use oracle::{make_problem, Problem};
pub use scaling::{AdagradScaling, Branch, DivergentScaling, Scaling};
