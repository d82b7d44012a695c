//! Case-study pipeline: optional per-group aggregation, sparse-column
//! pruning, then repeated forest imputation collecting out-of-bag errors
//! and timings.

use std::time::Instant;

use mixfill_core::metrics::{boxplot_stats, BoxplotStats};
use mixfill_core::rng::SeededRng;
use mixfill_core::table::TableError;
use mixfill_core::{missforest_impute, ForestParams, MixedTable};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineConfig {
    /// Columns whose missing fraction exceeds this are dropped.
    pub threshold: f64,
    /// Optional key column: rows are first collapsed to per-group
    /// mean/mode aggregates.
    #[serde(default)]
    pub key: Option<String>,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default = "default_ntree")]
    pub ntree: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub measure_time: bool,
}

fn default_ntree() -> usize {
    100
}
fn default_max_iter() -> usize {
    10
}
fn default_true() -> bool {
    true
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("imputation failed in repetition {repetition}: {source}")]
    Impute {
        repetition: usize,
        source: mixfill_core::forest::ForestError,
    },
    #[error("repetitions must be >= 1")]
    NoRepetitions,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineReport {
    pub dropped_columns: Vec<String>,
    pub retained_columns: Vec<String>,
    /// Missing fraction per retained column.
    pub column_missingness: Vec<(String, f64)>,
    pub overall_missingness: f64,
    pub repetitions: usize,
    pub oob_nrmse: Vec<f64>,
    pub oob_pfc: Vec<f64>,
    pub times_s: Vec<f64>,
    pub oob_nrmse_stats: Option<BoxplotStats>,
    pub oob_pfc_stats: Option<BoxplotStats>,
    pub time_stats: Option<BoxplotStats>,
}

/// Runs the pipeline and returns the report along with the imputed table
/// from the first repetition.
pub fn pipeline_case_study(
    table: &MixedTable,
    config: &PipelineConfig,
) -> Result<(PipelineReport, MixedTable), PipelineError> {
    if config.repetitions == 0 {
        return Err(PipelineError::NoRepetitions);
    }
    let staged = match &config.key {
        Some(key) => table.group_mean_aggregate(key)?,
        None => table.clone(),
    };
    let (pruned, dropped) = staged.drop_sparse_columns(config.threshold)?;
    let (per_column, overall) = pruned.column_missingness();
    let root = SeededRng::new(config.seed).child("pipeline");
    let mut oob_nrmse = Vec::new();
    let mut oob_pfc = Vec::new();
    let mut times = Vec::new();
    let mut first_imputed: Option<MixedTable> = None;
    for rep in 0..config.repetitions {
        let params = ForestParams {
            ntree: config.ntree,
            max_iter: config.max_iter,
            seed: root.child(&format!("rep{rep}")).seed(),
            ..ForestParams::default()
        };
        let started = Instant::now();
        let result = missforest_impute(&pruned, &params)
            .map_err(|source| PipelineError::Impute { repetition: rep, source })?;
        if config.measure_time {
            times.push(started.elapsed().as_secs_f64());
        } else {
            times.push(0.0);
        }
        if let Some(oob) = &result.diagnostics.oob {
            if let Some(v) = oob.nrmse {
                oob_nrmse.push(v);
            }
            if let Some(v) = oob.pfc {
                oob_pfc.push(v);
            }
        }
        if first_imputed.is_none() {
            first_imputed = Some(result.table);
        }
    }
    let stats = |v: &[f64]| if v.is_empty() { None } else { Some(boxplot_stats(v)) };
    let report = PipelineReport {
        dropped_columns: dropped,
        retained_columns: pruned.columns().iter().map(|c| c.name.clone()).collect(),
        column_missingness: pruned
            .columns()
            .iter()
            .zip(&per_column)
            .map(|(c, &f)| (c.name.clone(), f))
            .collect(),
        overall_missingness: overall,
        repetitions: config.repetitions,
        oob_nrmse_stats: stats(&oob_nrmse),
        oob_pfc_stats: stats(&oob_pfc),
        time_stats: stats(&times),
        oob_nrmse,
        oob_pfc,
        times_s: times,
    };
    Ok((report, first_imputed.expect("at least one repetition")))
}
