//! Numerical eigenvalue problems for the double phase operator
//! `−div(a|∇u|^{p−2}∇u) − div(|∇u|^{q−2}∇u) = λ m|u|^{q−2}u` with an
//! indefinite weight `m = m₁ − m₂`, discretized with piecewise linear
//! elements on a truncated domain.

// `!(x > 0.0)` is used on purpose so that NaN fails every admissibility test.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod eigensolve;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod linalg;
pub mod modular;
pub mod verify;

pub use error::{Error, Result};
