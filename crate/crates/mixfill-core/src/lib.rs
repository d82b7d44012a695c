//! Core algorithms for imputing missing entries in mixed-type tabular data.
//!
//! The crate provides a column-typed table model ([`table::MixedTable`]),
//! reproducible MCAR amputation ([`ampute`]), three imputation methods
//! (Gower-distance KNN in [`knn`], chained equations in [`mice`], iterative
//! random forests with out-of-bag error estimation in [`forest`]) and the
//! scoring machinery used to compare them ([`metrics`]).
//!
//! Everything here is pure computation over owned data: no IO, no clocks,
//! no global state. All randomness flows through [`rng::SeededRng`] so that
//! results are reproducible across platforms and thread counts. The crate is
//! `no_std` + `alloc` compatible; the companion `mixfill` crate carries CSV,
//! schema files, the benchmark harness and the command-line interface.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ampute;
pub mod forest;
pub mod knn;
pub mod metrics;
pub mod mice;
pub mod result;
pub mod rng;
pub mod table;

mod linalg;
mod math;

pub use ampute::{ampute_mcar, AmputationSpec, AmputeError};
pub use forest::{missforest_impute, ForestParams};
pub use knn::{knn_impute, KnnParams};
pub use mice::{mice_impute, pool, MiceParams};
pub use result::ImputationResult;
pub use rng::SeededRng;
pub use table::{Cell, ColumnKind, MissingMask, MixedTable, Provenance};
