//! Headless runner, log verifier, model trainer and session server.

pub mod commands;
pub mod generator;
pub mod run;
pub mod scenario;
pub mod timeline;

pub use run::{CliError, Exit};
