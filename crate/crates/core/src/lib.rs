// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernels;
pub mod meanfield;
pub mod metrics;
pub mod particles;
pub mod runner;
pub mod stats;
pub mod targets;

pub use error::{Error, Result};
