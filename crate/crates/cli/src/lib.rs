//! Command-line harness for trial-offer market experiments: file formats,
//! experiment orchestration, the result store and the verification suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod store;
pub mod verify;

pub use error::{CliError, Result};
