//! Imputation methods, MCAR amputation, a CART/random-forest engine and a
//! seeded benchmark harness for comparing imputers on tabular data.

pub mod amputation;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod impute;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
