//! Spacecraft telemetry anomaly detection toolkit.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costmodel;
pub mod data;
pub mod detectors;
pub mod error;
pub mod gaf;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
