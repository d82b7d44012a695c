//! Std companion to `mixfill-core`: schemas and CSV IO, bundled datasets,
//! the benchmark harness, the case-study pipeline, and the command-line
//! interface.

pub use mixfill_core as core;

pub mod bench;
pub mod cli;
pub mod datasets;
pub mod io;
pub mod pipeline;
pub mod schema;
