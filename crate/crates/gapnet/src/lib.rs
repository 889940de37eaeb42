//! Neural and combinatorial solvers for generalized assignment problems.

// Link a BLAS implementation for ndarray's matrix products. Binaries and
// tests inherit the linkage by depending on this crate.
extern crate blas_src;

pub mod dataset;
pub mod error;
pub mod gap;
pub mod loss;
pub mod nn;
pub mod oracle;
pub(crate) mod seed;
pub mod train;
pub mod wireless;

pub use error::{Error, Result};
