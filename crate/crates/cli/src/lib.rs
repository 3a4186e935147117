//! Command-line front end: dataset splitting, normalisation statistics,
//! training, evaluation, gradient checking, parameter counts and synthetic
//! data generation.

pub mod commands;
pub mod config;
pub mod gradsuite;

pub use commands::exit_code;
pub use config::RunConfig;
