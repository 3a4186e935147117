//! MobileNetV2 with squeeze-and-excitation attention for three-class chest
//! X-ray classification, built on a small tensor library with hand-derived
//! backward passes.

// Range checks are written `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Rng, Tensor};
