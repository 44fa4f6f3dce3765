//! Numerical laboratory for power-weighted Morrey spaces.
//!
//! The crate computes strong and weak weighted Morrey norms, Muckenhoupt and
//! reverse Hölder diagnostics, the Hardy–Littlewood maximal operator and the
//! Hilbert transform on piecewise-constant grid functions, and runs sweeps
//! that classify `(p, lambda, beta)` cells as bounded or unbounded for the
//! power weight `|x|^beta`.

// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grid;
pub mod morrey;
pub mod operators;
pub mod sweep;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
