//! Sublinear expectations under volatility uncertainty.
//!
//! Three routes to the same number: a discrete-time supremum over martingale
//! laws with constrained conditional covariance ([`weak_dp`]), a supremum over
//! controlled random-walk integrals ([`strong_walk`]), and the nonlinear heat
//! equation `-u_t - G(D^2 u) = 0` ([`gpde`]). The [`harness`] module runs
//! them side by side.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dp;
pub mod error;
pub mod gpde;
pub mod harness;
pub mod payoffs;
pub mod sampling;
pub mod strong_walk;
pub mod uncertainty_set;
pub mod value_grid;
pub mod weak_dp;

pub use error::{Error, Result};
pub use payoffs::{DiscretePath, PathPayoff, PayoffFn, PayoffKind};
pub use uncertainty_set::{SymMatrix, UncertaintySet};
