use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A tensor did not have the expected shape. The message names the axis.
    #[error("shape error: {0}")]
    Shape(String),
    /// Invalid hyper-parameter or configuration value.
    #[error("config error: {0}")]
    Config(String),
    /// An API was called out of order, e.g. backward before forward.
    #[error("usage error: {0}")]
    Usage(String),
    /// Invalid caller-supplied data such as an out-of-range label.
    #[error("input error: {0}")]
    Input(String),
    /// Malformed checkpoint or raw image bytes.
    #[error("format error: {0}")]
    Format(String),
    /// Checkpoint tensors that could not be applied to a model.
    #[error("load error: {0}")]
    Load(String),
    /// Dataset layout or split problems.
    #[error("data error: {0}")]
    Data(String),
    #[error("decode error: {0}")]
    Decode(String),
    /// NaN/Inf loss or a failed numerical check.
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
