//! Command-line front end for the two-stage tomography pipeline: config
//! loading, run directories with hashed manifests, and report emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use config::StudyConfig;
pub use error::{CliError, Result};
