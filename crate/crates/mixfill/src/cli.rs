//! Command-line interface: thin adapters over the library.
//!
//! Exit codes: 0 success, 1 usage error, 2 input-data error, 3 runtime
//! failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mixfill_core::metrics::{
    absolute_pair_correlations, strength_label, structural_indices, SkewVariant,
};
use mixfill_core::{ampute_mcar, AmputationSpec, MixedTable};
use serde_json::json;

use crate::bench::{self, BenchConfig, MethodConfig};
use crate::datasets;
use crate::io;
use crate::pipeline::{pipeline_case_study, PipelineConfig};
use crate::schema::Schema;

#[derive(Debug, Parser)]
#[command(
    name = "mixfill",
    about = "Impute missing entries in mixed-type tabular data",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV path (requires --schema).
    #[arg(long, conflicts_with = "dataset", requires = "schema")]
    pub input: Option<PathBuf>,
    /// JSON schema path describing the input columns.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Bundled dataset name instead of --input.
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove a fraction of cells completely at random from a complete table.
    Ampute {
        #[command(flatten)]
        input: InputArgs,
        /// Fraction of cells to remove, in (0, 1).
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Fill every missing cell.
    Impute {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_parser = ["knn", "mice", "missforest"])]
        method: String,
        /// Seed for the stochastic methods (mice, missforest).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        maxit: usize,
        #[arg(long, default_value_t = 5)]
        pmm_donors: usize,
        #[arg(long, default_value_t = 1e-5)]
        ridge: f64,
        #[arg(long, default_value_t = 100)]
        ntree: usize,
        /// Candidate predictors per split (default: floor(sqrt(p-1))).
        #[arg(long)]
        mtry: Option<usize>,
        #[arg(long, default_value_t = 10)]
        max_iter: usize,
        #[arg(long)]
        output: PathBuf,
        /// Optional path for a diagnostics JSON file.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Print missingness, structural indices, and pairwise correlation
    /// strength labels as JSON.
    Describe {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Run the factorial benchmark described by a JSON config.
    Bench {
        /// BenchConfig JSON path.
        #[arg(long)]
        config: PathBuf,
        /// Report output path (.json or .csv by --format).
        #[arg(long)]
        output: PathBuf,
        /// Optional CSV path for the raw per-trial records.
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Worker threads (overrides the config).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
        format: String,
    },
    /// Aggregate, prune sparse columns, and repeatedly impute, collecting
    /// out-of-bag errors.
    Pipeline {
        #[command(flatten)]
        input: InputArgs,
        /// Drop columns whose missing fraction exceeds this.
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        /// Optional key column for per-group mean/mode aggregation.
        #[arg(long)]
        key: Option<String>,
        #[arg(long, default_value_t = 100)]
        repetitions: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        ntree: usize,
        /// Output CSV for the imputed table of the first repetition.
        #[arg(long)]
        output: PathBuf,
        /// Report JSON path (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
    fn data(message: impl std::fmt::Display) -> Self {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }
    fn runtime(message: impl std::fmt::Display) -> Self {
        CliError {
            code: 3,
            message: message.to_string(),
        }
    }
}

fn load_input(args: &InputArgs) -> Result<MixedTable, CliError> {
    match (&args.input, &args.dataset) {
        (Some(path), None) => {
            let schema_path = args
                .schema
                .as_ref()
                .ok_or_else(|| CliError::usage("--input requires --schema"))?;
            let schema = Schema::from_file(schema_path).map_err(CliError::data)?;
            io::read_table_path(path, &schema).map_err(CliError::data)
        }
        (None, Some(name)) => Ok(datasets::load_builtin(name).map_err(CliError::data)?.0),
        _ => Err(CliError::usage("provide exactly one of --input or --dataset")),
    }
}

fn write_output(table: &MixedTable, path: &Path) -> Result<(), CliError> {
    io::write_table_path(table, path, "NA").map_err(CliError::runtime)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ampute {
            input,
            fraction,
            seed,
            output,
        } => {
            let table = load_input(&input)?;
            let (holed, mask) = ampute_mcar(&table, &AmputationSpec::new(fraction, seed))
                .map_err(CliError::runtime)?;
            write_output(&holed, &output)?;
            eprintln!("removed {} cells", mask.len());
            Ok(())
        }
        Command::Impute {
            input,
            method,
            seed,
            k,
            m,
            maxit,
            pmm_donors,
            ridge,
            ntree,
            mtry,
            max_iter,
            output,
            diagnostics,
        } => {
            let table = load_input(&input)?;
            let config = match method.as_str() {
                "knn" => MethodConfig::Knn { k },
                "mice" => MethodConfig::Mice {
                    m,
                    maxit,
                    pmm_donors,
                    ridge,
                },
                "missforest" => MethodConfig::Missforest {
                    ntree,
                    mtry,
                    max_iter,
                },
                _ => unreachable!("clap validates the method"),
            };
            let seed = match (&config, seed) {
                (MethodConfig::Knn { .. }, s) => s.unwrap_or(0),
                (_, Some(s)) => s,
                (_, None) => {
                    return Err(CliError::usage(format!(
                        "--seed is required for --method {method}"
                    )))
                }
            };
            let diag = impute_with_diagnostics(&table, &config, seed)?;
            write_output(&diag.0, &output)?;
            if let Some(path) = diagnostics {
                std::fs::write(path, diag.1.to_string()).map_err(CliError::runtime)?;
            }
            Ok(())
        }
        Command::Describe { input } => {
            let table = load_input(&input)?;
            println!("{}", describe_json(&table));
            Ok(())
        }
        Command::Bench {
            config,
            output,
            raw,
            threads,
            format,
        } => {
            let text = std::fs::read_to_string(&config).map_err(CliError::data)?;
            let mut config: BenchConfig =
                serde_json::from_str(&text).map_err(CliError::data)?;
            if threads.is_some() {
                config.threads = threads;
            }
            let (report, records) = bench::run_experiment(&config).map_err(CliError::runtime)?;
            let body = match format.as_str() {
                "json" => bench::report_to_json(&report),
                _ => bench::report_to_csv(&report),
            };
            std::fs::write(&output, body).map_err(CliError::runtime)?;
            if let Some(path) = raw {
                std::fs::write(path, bench::trials_to_csv(&records)).map_err(CliError::runtime)?;
            }
            Ok(())
        }
        Command::Pipeline {
            input,
            threshold,
            key,
            repetitions,
            seed,
            ntree,
            output,
            report,
        } => {
            let table = load_input(&input)?;
            let config = PipelineConfig {
                threshold,
                key,
                repetitions,
                seed,
                ntree,
                max_iter: 10,
                measure_time: true,
            };
            let (rep, imputed) = pipeline_case_study(&table, &config).map_err(CliError::runtime)?;
            write_output(&imputed, &output)?;
            let body = serde_json::to_string_pretty(&rep).expect("report serializes");
            match report {
                Some(path) => std::fs::write(path, body).map_err(CliError::runtime)?,
                None => println!("{body}"),
            }
            Ok(())
        }
    }
}

fn impute_with_diagnostics(
    table: &MixedTable,
    config: &MethodConfig,
    seed: u64,
) -> Result<(MixedTable, serde_json::Value), CliError> {
    match config {
        MethodConfig::Knn { k } => {
            let r = mixfill_core::knn_impute(table, &mixfill_core::KnnParams { k: *k })
                .map_err(CliError::runtime)?;
            Ok((r.table, json!({ "method": "knn" })))
        }
        MethodConfig::Mice {
            m,
            maxit,
            pmm_donors,
            ridge,
        } => {
            let r = mixfill_core::mice_impute(
                table,
                &mixfill_core::MiceParams {
                    m: *m,
                    maxit: *maxit,
                    pmm_donors: *pmm_donors,
                    ridge: *ridge,
                    drop_collinear: false,
                    seed,
                },
            )
            .map_err(CliError::runtime)?;
            let diag = serde_json::to_value(&r.pooled.diagnostics).expect("serializes");
            Ok((r.pooled.table, json!({ "method": "mice", "diagnostics": diag })))
        }
        MethodConfig::Missforest {
            ntree,
            mtry,
            max_iter,
        } => {
            let r = mixfill_core::missforest_impute(
                table,
                &mixfill_core::ForestParams {
                    ntree: *ntree,
                    mtry: *mtry,
                    max_iter: *max_iter,
                    seed,
                    ..mixfill_core::ForestParams::default()
                },
            )
            .map_err(CliError::runtime)?;
            let diag = serde_json::to_value(&r.diagnostics).expect("serializes");
            Ok((r.table, json!({ "method": "missforest", "diagnostics": diag })))
        }
    }
}

pub fn describe_json(table: &MixedTable) -> String {
    let (per_column, overall) = table.column_missingness();
    let missingness: Vec<_> = table
        .columns()
        .iter()
        .zip(&per_column)
        .map(|(c, &f)| json!({ "column": c.name, "missing_fraction": f }))
        .collect();
    let indices = if table.has_missing() {
        json!(null)
    } else {
        match (
            structural_indices(table, SkewVariant::Standardized),
            structural_indices(table, SkewVariant::AsWritten),
        ) {
            (Ok(std_ix), Ok(raw_ix)) => json!({
                "rho_abs": std_ix.rho_abs,
                "sd_abs": std_ix.sd_abs,
                "skew_abs_standardized": std_ix.skew_abs,
                "skew_abs_as_written": raw_ix.skew_abs,
                "pairs": std_ix.n_pairs,
            }),
            _ => json!(null),
        }
    };
    let labels = if table.has_missing() {
        json!(null)
    } else {
        match absolute_pair_correlations(table) {
            Ok(cors) => {
                let mut pairs = Vec::new();
                let mut it = cors.iter();
                for j in 0..table.n_cols() {
                    for l in (j + 1)..table.n_cols() {
                        let both_cat = !table.column(j).kind.is_quantitative()
                            && !table.column(l).kind.is_quantitative();
                        if both_cat {
                            continue;
                        }
                        if let Some(&rho) = it.next() {
                            pairs.push(json!({
                                "a": table.column(j).name,
                                "b": table.column(l).name,
                                "abs_correlation": rho,
                                "strength": format!("{:?}", strength_label(rho)).to_lowercase(),
                            }));
                        }
                    }
                }
                json!(pairs)
            }
            Err(_) => json!(null),
        }
    };
    serde_json::to_string_pretty(&json!({
        "rows": table.n_rows(),
        "columns": table.n_cols(),
        "overall_missing_fraction": overall,
        "column_missingness": missingness,
        "structural_indices": indices,
        "pair_strengths": labels,
    }))
    .expect("serializes")
}
