pub mod behavior;
pub mod cli;
pub mod clustering;
pub mod cvqvae;
pub mod dataset;
pub mod dgsfm;
pub mod error;
pub mod extraction;
pub mod ingest;
pub mod metrics;
pub mod types;

pub use error::{Error, Result};
