//! Closed-loop proximal methods for monotone inclusions and convex minimization.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod flow;
pub mod harness;
pub mod lambda;
pub mod linalg;
pub mod newton;
pub mod operators;
pub mod pp;

pub use error::{Error, Result};
