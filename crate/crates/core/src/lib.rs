//! Numerical toolkit for the coefficient problem on bounded nonvanishing
//! functions `f = exp(-h)`, `Re h > 0` in the unit disk.
//!
//! * [`series`]: truncated power series, Herglotz kernels and atoms.
//! * [`caratheodory`]: Toeplitz minors, coefficient-body membership, atom recovery.
//! * [`trig_poly`]: nonnegative trigonometric polynomials and Fejér–Riesz factors.
//! * [`extremal`]: candidate extremals and their optimality conditions.
//! * [`optimizer`]: multi-start search for `max |{f}_n|`.
//! * [`cli`]: command-line surface and JSON/CSV I/O.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod caratheodory;
pub mod cli;
pub mod error;
pub mod extremal;
pub mod optimizer;
pub mod roots;
pub mod series;
pub mod trig_poly;

pub use error::{Error, Result};

/// `2/e`, the conjectured value of `max |{f}_n|` for every `n`.
pub const TWO_OVER_E: f64 = 2.0 / std::f64::consts::E;
