//! Boundary-integral toolkit for the biharmonic single-layer potential on
//! smooth multi-connected plane curves.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over small fixed-size matrices read like the formulas.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod quadrature;
pub mod assembly;
pub mod robin;
pub mod scales;
pub mod export;
pub mod cli;

pub use error::{Error, Result};
