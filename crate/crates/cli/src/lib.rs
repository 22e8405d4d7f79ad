//! Command line and HTTP front ends for `codewe_core`.

pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod keys;
pub mod service;

pub use cli::{run, Cli, Outcome, OutputFormat};
pub use error::{AppError, AppResult};
