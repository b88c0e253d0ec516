//! Randomized directional-derivative methods for stochastic convex
//! optimization in `ℓ₁` and `ℓ₂` prox geometries.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod algorithms;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod planner;
pub mod rng;
pub mod trace;
pub mod verification;

pub use error::{Error, Result};
