//! Differentiable primitives, implemented as methods on [`Graph`](crate::Graph).

mod basic;
mod conv;
mod norm;
mod pool;

pub use norm::{BatchStats, NORM_EPS};
