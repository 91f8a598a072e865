//! Reference implementations shared by the integration tests and the
//! acceptance harness. Each one is written from the definitions, not from the
//! library code it checks.
#![allow(dead_code)]

pub mod gradients;
pub mod metrics;
pub mod pareto;
pub mod suite;
