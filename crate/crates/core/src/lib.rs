//! Learning the constraints (and optionally the cost) of an integer linear
//! program from example optima.
//!
//! Each constraint row is treated as a linear classifier trained with margin
//! losses: the observed optimum must lie inside every row, and sampled
//! non-optimal points must fall outside at least one row or cost more than
//! the optimum. Exact solving is only needed for evaluation.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod polytope;
pub mod rng;
pub mod sampler;
pub mod solver;
pub mod train;

pub use error::{Error, Result};
