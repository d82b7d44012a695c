//! Imputation outputs and per-method diagnostics.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::table::MixedTable;

/// Out-of-bag imputation error estimate of a forest imputation.
///
/// Either component is absent when the table has no column of that type
/// (or, for the quantitative part, when the pooled variance is zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OobEstimate {
    pub nrmse: Option<f64>,
    pub pfc: Option<f64>,
    /// Per-column error components, by column name.
    pub per_column: Vec<(String, f64)>,
    /// Set when a quantitative component was dropped for zero variance.
    pub variance_zero: bool,
}

/// Per-iteration convergence deltas of the forest imputation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingDeltas {
    /// Sum((new - old)^2) / Sum(new^2) over quantitative missing cells.
    pub quantitative: Option<f64>,
    /// Changed categorical imputations / categorical missing count.
    pub categorical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    /// Iterations (sweeps) actually performed.
    pub iterations: usize,
    /// Forest loop deltas, one entry per iteration.
    pub deltas: Vec<StoppingDeltas>,
    /// Chained-equations fallbacks, as (chain, sweep, column, reason).
    pub fallbacks: Vec<(usize, usize, String, String)>,
    pub oob: Option<OobEstimate>,
}

/// An imputed table plus how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationResult {
    pub table: MixedTable,
    pub method: String,
    pub diagnostics: Diagnostics,
}

impl ImputationResult {
    pub fn new(table: MixedTable, method: &str) -> Self {
        ImputationResult {
            table,
            method: String::from(method),
            diagnostics: Diagnostics::default(),
        }
    }
}
