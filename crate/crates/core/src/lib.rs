//! Finitely generated semigroup actions of expanding maps on flat spaces:
//! Markov partitions, hyperbolic times, cylinders, distortion, transitivity
//! and empirical ergodicity tests.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod cylinders;
pub mod ergodicity;
pub mod error;
pub mod expansion;
pub mod geometry;
pub mod irreducibility;
pub mod symbolic;
pub mod systems;

pub use error::{Error, Result};
