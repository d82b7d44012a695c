//! Benchmark harness: repeated seeded trials over datasets x methods x
//! missingness fractions, with deterministic aggregation into a report.

use std::time::Instant;

use mixfill_core::metrics::{self, BoxplotStats, SkewVariant};
use mixfill_core::rng::SeededRng;
use mixfill_core::table::MissingMask;
use mixfill_core::{ampute_mcar, AmputationSpec, MixedTable};
use mixfill_core::{knn_impute, mice_impute, missforest_impute};
use mixfill_core::{ForestParams, KnnParams, MiceParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets;
use crate::io;
use crate::schema::Schema;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Mice {
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_maxit")]
        maxit: usize,
        #[serde(default = "default_donors")]
        pmm_donors: usize,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    Missforest {
        #[serde(default = "default_ntree")]
        ntree: usize,
        #[serde(default)]
        mtry: Option<usize>,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
}

fn default_k() -> usize {
    5
}
fn default_m() -> usize {
    5
}
fn default_maxit() -> usize {
    5
}
fn default_donors() -> usize {
    5
}
fn default_ridge() -> f64 {
    1e-5
}
fn default_ntree() -> usize {
    100
}
fn default_max_iter() -> usize {
    10
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Knn { .. } => "knn",
            MethodConfig::Mice { .. } => "mice",
            MethodConfig::Missforest { .. } => "missforest",
        }
    }

    pub fn impute(&self, table: &MixedTable, seed: u64) -> Result<MixedTable, String> {
        match self {
            MethodConfig::Knn { k } => knn_impute(table, &KnnParams { k: *k })
                .map(|r| r.table)
                .map_err(|e| e.to_string()),
            MethodConfig::Mice {
                m,
                maxit,
                pmm_donors,
                ridge,
            } => mice_impute(
                table,
                &MiceParams {
                    m: *m,
                    maxit: *maxit,
                    pmm_donors: *pmm_donors,
                    ridge: *ridge,
                    drop_collinear: false,
                    seed,
                },
            )
            .map(|r| r.pooled.table)
            .map_err(|e| e.to_string()),
            MethodConfig::Missforest {
                ntree,
                mtry,
                max_iter,
            } => missforest_impute(
                table,
                &ForestParams {
                    ntree: *ntree,
                    mtry: *mtry,
                    max_iter: *max_iter,
                    seed,
                    ..ForestParams::default()
                },
            )
            .map(|r| r.table)
            .map_err(|e| e.to_string()),
        }
    }
}

/// A dataset entry: a builtin name, or a CSV path with its schema.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DatasetSpec {
    Builtin(String),
    External {
        name: String,
        path: String,
        schema: String,
    },
}

impl DatasetSpec {
    pub fn name(&self) -> &str {
        match self {
            DatasetSpec::Builtin(n) => n,
            DatasetSpec::External { name, .. } => name,
        }
    }

    pub fn load(&self) -> Result<MixedTable, BenchError> {
        match self {
            DatasetSpec::Builtin(n) => Ok(datasets::load_builtin(n)?.0),
            DatasetSpec::External { path, schema, .. } => {
                let schema = Schema::from_file(std::path::Path::new(schema))
                    .map_err(|e| BenchError::Config(e.to_string()))?;
                Ok(io::read_table_path(std::path::Path::new(path), &schema)?)
            }
        }
    }
}

pub fn default_fractions() -> Vec<f64> {
    vec![0.02, 0.05, 0.10, 0.20]
}

fn default_trials() -> usize {
    1000
}

fn default_reference() -> String {
    "missforest".to_string()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    pub methods: Vec<MethodConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Method the relative error gaps are measured against.
    #[serde(default = "default_reference")]
    pub reference_method: String,
    /// When false, trial times are recorded as 0 so reports are
    /// byte-identical regardless of load or thread count.
    #[serde(default = "default_true")]
    pub measure_time: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] datasets::DatasetError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrialRecord {
    pub dataset: String,
    pub method: String,
    pub fraction: f64,
    pub trial: usize,
    pub nrmse: Option<f64>,
    pub pfc: Option<f64>,
    pub time_s: f64,
    /// Failure tag; a failed trial is kept in the raw records but excluded
    /// from aggregates.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportCell {
    pub dataset: String,
    pub method: String,
    pub fraction: f64,
    pub trials: usize,
    pub excluded: usize,
    pub nrmse: Option<BoxplotStats>,
    pub pfc: Option<BoxplotStats>,
    pub time: Option<BoxplotStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RankEntry {
    pub dataset: String,
    pub method: String,
    pub mean_time: f64,
    /// 1 = fastest; equal means share a rank.
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GapEntry {
    pub dataset: String,
    pub method: String,
    pub reference: String,
    /// Mean over fractions of the relative gap between this method's mean
    /// error and the reference method's.
    pub nrmse_gap: Option<f64>,
    pub pfc_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IndexEntry {
    pub dataset: String,
    pub rho_abs: f64,
    pub sd_abs: f64,
    pub skew_abs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub cells: Vec<ReportCell>,
    pub ranks: Vec<RankEntry>,
    pub gaps: Vec<GapEntry>,
    /// Structural indices of each complete dataset that admits them.
    pub indices: Vec<IndexEntry>,
}

/// One amputation + imputation + scoring pass. Timing brackets the impute
/// call only.
pub fn run_trial(
    dataset: &str,
    complete: &MixedTable,
    method: &MethodConfig,
    fraction: f64,
    trial: usize,
    master_seed: u64,
    measure_time: bool,
) -> TrialRecord {
    let label = format!("{dataset}/{}/{fraction}/{trial}", method.name());
    let child = SeededRng::new(master_seed).child(&label);
    let mut record = TrialRecord {
        dataset: dataset.to_string(),
        method: method.name().to_string(),
        fraction,
        trial,
        nrmse: None,
        pfc: None,
        time_s: 0.0,
        error: None,
    };
    let (holed, mask): (MixedTable, MissingMask) =
        match ampute_mcar(complete, &AmputationSpec::new(fraction, child.child("ampute").seed())) {
            Ok(v) => v,
            Err(e) => {
                record.error = Some(format!("ampute: {e}"));
                return record;
            }
        };
    let started = Instant::now();
    let imputed = match method.impute(&holed, child.child("impute").seed()) {
        Ok(t) => t,
        Err(e) => {
            record.error = Some(format!("impute: {e}"));
            return record;
        }
    };
    if measure_time {
        record.time_s = started.elapsed().as_secs_f64();
    }
    match metrics::error_scores(complete, &imputed, &mask) {
        Ok(scores) => {
            record.nrmse = scores.nrmse;
            record.pfc = scores.pfc;
            if scores.variance_zero {
                record.error = Some("score: zero variance over masked cells".to_string());
            }
        }
        Err(e) => record.error = Some(format!("score: {e}")),
    }
    record
}

/// Full factorial experiment. Trials run in parallel over a fixed list, so
/// the collected order — and therefore the report — does not depend on the
/// thread count.
pub fn run_experiment(config: &BenchConfig) -> Result<(BenchReport, Vec<TrialRecord>), BenchError> {
    if config.trials == 0 {
        return Err(BenchError::Config("trials must be >= 1".into()));
    }
    for f in &config.fractions {
        if !(*f > 0.0 && *f <= 0.5) {
            return Err(BenchError::Config(format!(
                "fraction {f} outside (0, 0.5]"
            )));
        }
    }
    if config.methods.is_empty() {
        return Err(BenchError::Config("no methods configured".into()));
    }
    let tables: Vec<(String, MixedTable)> = config
        .datasets
        .iter()
        .map(|d| Ok((d.name().to_string(), d.load()?)))
        .collect::<Result<_, BenchError>>()?;
    let mut jobs: Vec<(usize, usize, f64, usize)> = Vec::new();
    for (di, _) in tables.iter().enumerate() {
        for (mi, _) in config.methods.iter().enumerate() {
            for &fraction in &config.fractions {
                for trial in 0..config.trials {
                    jobs.push((di, mi, fraction, trial));
                }
            }
        }
    }
    let run_all = || {
        jobs.par_iter()
            .map(|&(di, mi, fraction, trial)| {
                run_trial(
                    &tables[di].0,
                    &tables[di].1,
                    &config.methods[mi],
                    fraction,
                    trial,
                    config.seed,
                    config.measure_time,
                )
            })
            .collect::<Vec<_>>()
    };
    let records = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Pool(e.to_string()))?
            .install(run_all),
        None => run_all(),
    };
    let report = aggregate(config, &tables, &records);
    Ok((report, records))
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn aggregate(
    config: &BenchConfig,
    tables: &[(String, MixedTable)],
    records: &[TrialRecord],
) -> BenchReport {
    let mut cells = Vec::new();
    for (dataset, _) in tables {
        for method in &config.methods {
            for &fraction in &config.fractions {
                let ok: Vec<&TrialRecord> = records
                    .iter()
                    .filter(|r| {
                        r.dataset == *dataset
                            && r.method == method.name()
                            && r.fraction == fraction
                            && r.error.is_none()
                    })
                    .collect();
                let excluded = config.trials - ok.len();
                let nrmses: Vec<f64> = ok.iter().filter_map(|r| r.nrmse).collect();
                let pfcs: Vec<f64> = ok.iter().filter_map(|r| r.pfc).collect();
                let times: Vec<f64> = ok.iter().map(|r| r.time_s).collect();
                let stats = |v: &[f64]| {
                    if v.is_empty() {
                        None
                    } else {
                        Some(metrics::boxplot_stats(v))
                    }
                };
                cells.push(ReportCell {
                    dataset: dataset.clone(),
                    method: method.name().to_string(),
                    fraction,
                    trials: config.trials,
                    excluded,
                    nrmse: stats(&nrmses),
                    pfc: stats(&pfcs),
                    time: stats(&times),
                });
            }
        }
    }
    // per-dataset mean times and shared-rank assignment
    let mut ranks = Vec::new();
    for (dataset, _) in tables {
        let means: Vec<(String, f64)> = config
            .methods
            .iter()
            .filter_map(|m| {
                let times: Vec<f64> = records
                    .iter()
                    .filter(|r| {
                        r.dataset == *dataset && r.method == m.name() && r.error.is_none()
                    })
                    .map(|r| r.time_s)
                    .collect();
                mean(&times).map(|t| (m.name().to_string(), t))
            })
            .collect();
        for (method, t) in &means {
            let rank = 1 + means.iter().filter(|(_, other)| other < t).count();
            ranks.push(RankEntry {
                dataset: dataset.clone(),
                method: method.clone(),
                mean_time: *t,
                rank,
            });
        }
    }
    // mean relative gaps vs the reference method
    let mut gaps = Vec::new();
    let per_fraction_mean = |dataset: &str, method: &str, fraction: f64, pick: &dyn Fn(&TrialRecord) -> Option<f64>| {
        let vals: Vec<f64> = records
            .iter()
            .filter(|r| {
                r.dataset == dataset && r.method == method && r.fraction == fraction
                    && r.error.is_none()
            })
            .filter_map(pick)
            .collect();
        mean(&vals)
    };
    for (dataset, _) in tables {
        for method in &config.methods {
            if method.name() == config.reference_method {
                continue;
            }
            let gap_for = |pick: &dyn Fn(&TrialRecord) -> Option<f64>| {
                let gs: Vec<f64> = config
                    .fractions
                    .iter()
                    .filter_map(|&f| {
                        let x = per_fraction_mean(dataset, method.name(), f, pick)?;
                        let r = per_fraction_mean(dataset, &config.reference_method, f, pick)?;
                        metrics::relative_gap(x, r).ok()
                    })
                    .collect();
                mean(&gs)
            };
            gaps.push(GapEntry {
                dataset: dataset.clone(),
                method: method.name().to_string(),
                reference: config.reference_method.clone(),
                nrmse_gap: gap_for(&|r| r.nrmse),
                pfc_gap: gap_for(&|r| r.pfc),
            });
        }
    }
    let indices = tables
        .iter()
        .filter(|(_, t)| !t.has_missing())
        .filter_map(|(name, t)| {
            metrics::structural_indices(t, SkewVariant::Standardized)
                .ok()
                .map(|ix| IndexEntry {
                    dataset: name.clone(),
                    rho_abs: ix.rho_abs,
                    sd_abs: ix.sd_abs,
                    skew_abs: ix.skew_abs,
                })
        })
        .collect();
    BenchReport {
        cells,
        ranks,
        gaps,
        indices,
    }
}

pub fn report_to_json(report: &BenchReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Long-format CSV: one row per (dataset, method, fraction, statistic).
/// Rank, gap, and index rows leave the fraction column empty.
pub fn report_to_csv(report: &BenchReport) -> String {
    let mut out = String::from("dataset,method,fraction,statistic,value\n");
    let mut push = |dataset: &str, method: &str, fraction: Option<f64>, stat: &str, value: f64| {
        let f = fraction.map_or(String::new(), |v| format!("{v}"));
        out.push_str(&format!("{dataset},{method},{f},{stat},{value}\n"));
    };
    for c in &report.cells {
        push(&c.dataset, &c.method, Some(c.fraction), "trials", c.trials as f64);
        push(
            &c.dataset,
            &c.method,
            Some(c.fraction),
            "excluded",
            c.excluded as f64,
        );
        for (prefix, stats) in [("nrmse", &c.nrmse), ("pfc", &c.pfc), ("time", &c.time)] {
            if let Some(s) = stats {
                for (name, v) in [
                    ("min", s.min),
                    ("q1", s.q1),
                    ("median", s.median),
                    ("q3", s.q3),
                    ("max", s.max),
                    ("mean", s.mean),
                    ("sd", s.sd),
                    ("whisker_low", s.whisker_low),
                    ("whisker_high", s.whisker_high),
                ] {
                    push(&c.dataset, &c.method, Some(c.fraction), &format!("{prefix}_{name}"), v);
                }
            }
        }
    }
    for r in &report.ranks {
        push(&r.dataset, &r.method, None, "mean_time", r.mean_time);
        push(&r.dataset, &r.method, None, "time_rank", r.rank as f64);
    }
    for g in &report.gaps {
        if let Some(v) = g.nrmse_gap {
            push(&g.dataset, &g.method, None, "nrmse_mean_gap_vs_reference", v);
        }
        if let Some(v) = g.pfc_gap {
            push(&g.dataset, &g.method, None, "pfc_mean_gap_vs_reference", v);
        }
    }
    for ix in &report.indices {
        push(&ix.dataset, "", None, "rho_abs", ix.rho_abs);
        push(&ix.dataset, "", None, "sd_abs", ix.sd_abs);
        push(&ix.dataset, "", None, "skew_abs", ix.skew_abs);
    }
    out
}

pub fn trials_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("dataset,method,fraction,trial,nrmse,pfc,time_s,error\n");
    for r in records {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.dataset,
            r.method,
            r.fraction,
            r.trial,
            opt(r.nrmse),
            opt(r.pfc),
            r.time_s,
            r.error.as_deref().unwrap_or("").replace(',', ";")
        ));
    }
    out
}
