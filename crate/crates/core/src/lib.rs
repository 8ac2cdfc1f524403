//! Identification of switched linear systems with the least sum-of-minimums
//! estimator, together with the data-dependent quantities that govern its
//! robustness to sparse outliers and dense noise.

pub mod analysis;
pub mod assign;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;

pub(crate) mod flow;
pub(crate) mod lp;

pub use error::{LsmError, Result};
pub use model::{Dataset, ParameterMatrix};
