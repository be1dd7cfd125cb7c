//! Numerical harness for Calderón–Zygmund operators against non-homogeneous
//! measures: dyadic grids, atomic measures, Haar systems, kernels and the
//! diagnostics built on them.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod haar;
pub mod kernel;
pub mod measure;
pub mod operator;
pub mod reduce;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
