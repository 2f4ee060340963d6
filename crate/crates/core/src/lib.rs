pub mod corruption;
pub mod env;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod ingest;
pub mod modelselect;
pub mod policies;
pub mod rng;

pub use error::{Error, Result};
