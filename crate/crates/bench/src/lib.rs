//! Shared fixtures for the criterion benchmarks.

pub use qpcd_core as core;
