//! IO, simulation studies and the command-line surface for FG inference.
//!
//! Numerics live in [`fgumbel_core`]; this crate adds CSV ingestion,
//! versioned JSON result documents, the replication harness and parallel
//! drivers.

pub mod cli;
pub mod dataset;
pub mod document;
pub mod error;
pub mod parallel;
pub mod study;

pub use fgumbel_core as core;
