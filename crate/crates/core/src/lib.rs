//! Finite-difference laboratory for a one-dimensional wave transmission
//! problem with frictional damping, time-dependent weights and a
//! time-varying delay.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod diagnostics;
pub mod discretization;
pub mod lyapunov;
pub mod model;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
