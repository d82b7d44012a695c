//! Scoring and characterization: NRMSE, PFC, correlation-based structural
//! indices, relative gaps, and boxplot summaries.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::table::{ColumnKind, MissingMask, MixedTable};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("tables have different schemas")]
    SchemaMismatch,
    #[error("mask position ({row}, {column}) is not observed in both tables")]
    Unscored { row: usize, column: usize },
    #[error("input vectors must have equal length >= 2")]
    BadLength,
    #[error("constant input has no correlation")]
    ConstantInput,
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("need at least one comparable column pair")]
    TooFewPairs,
    #[error("reference value is zero")]
    ZeroReference,
    #[error("column `{0}` must be fully observed")]
    NotObserved(String),
}

/// Imputation error scores over the masked cells of one table pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorScores {
    /// Normalized RMSE over quantitative masked cells; absent when there are
    /// none. `variance_zero` flags the degenerate all-equal-truth case.
    pub nrmse: Option<f64>,
    /// Misclassification share over categorical masked cells; absent when
    /// there are none.
    pub pfc: Option<f64>,
    pub n_quantitative: usize,
    pub n_categorical: usize,
    pub variance_zero: bool,
}

/// NRMSE and PFC in one pass over the mask.
pub fn error_scores(
    complete: &MixedTable,
    imputed: &MixedTable,
    mask: &MissingMask,
) -> Result<ErrorScores, MetricsError> {
    if complete.columns() != imputed.columns() || complete.n_rows() != imputed.n_rows() {
        return Err(MetricsError::SchemaMismatch);
    }
    let mut truth = Vec::new();
    let mut diffs = Vec::new();
    let mut n_cat = 0usize;
    let mut wrong = 0usize;
    for (r, c, _) in mask.iter() {
        match &complete.column(c).kind {
            ColumnKind::Quantitative => {
                let t = complete
                    .cell(r, c)
                    .as_number()
                    .ok_or(MetricsError::Unscored { row: r, column: c })?;
                let i = imputed
                    .cell(r, c)
                    .as_number()
                    .ok_or(MetricsError::Unscored { row: r, column: c })?;
                truth.push(t);
                diffs.push(t - i);
            }
            ColumnKind::Categorical { .. } => {
                let t = complete
                    .cell(r, c)
                    .as_level()
                    .ok_or(MetricsError::Unscored { row: r, column: c })?;
                let i = imputed
                    .cell(r, c)
                    .as_level()
                    .ok_or(MetricsError::Unscored { row: r, column: c })?;
                n_cat += 1;
                if t != i {
                    wrong += 1;
                }
            }
        }
    }
    let n_quant = truth.len();
    let mut variance_zero = false;
    let nrmse = if n_quant == 0 {
        None
    } else {
        let mean_sq = diffs.iter().map(|d| d * d).sum::<f64>() / n_quant as f64;
        let mu = truth.iter().sum::<f64>() / n_quant as f64;
        // population variance over the masked multiset
        let var = truth.iter().map(|t| (t - mu) * (t - mu)).sum::<f64>() / n_quant as f64;
        if var == 0.0 {
            variance_zero = mean_sq != 0.0;
            if mean_sq == 0.0 {
                Some(0.0)
            } else {
                None
            }
        } else {
            Some(math::sqrt(mean_sq / var))
        }
    };
    let pfc = if n_cat == 0 {
        None
    } else {
        Some(wrong as f64 / n_cat as f64)
    };
    Ok(ErrorScores {
        nrmse,
        pfc,
        n_quantitative: n_quant,
        n_categorical: n_cat,
        variance_zero,
    })
}

pub fn nrmse(
    complete: &MixedTable,
    imputed: &MixedTable,
    mask: &MissingMask,
) -> Result<Option<f64>, MetricsError> {
    Ok(error_scores(complete, imputed, mask)?.nrmse)
}

pub fn pfc(
    complete: &MixedTable,
    imputed: &MixedTable,
    mask: &MissingMask,
) -> Result<Option<f64>, MetricsError> {
    Ok(error_scores(complete, imputed, mask)?.pfc)
}

/// Bravais-Pearson linear correlation, population form.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(MetricsError::BadLength);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(MetricsError::ConstantInput);
    }
    Ok(cov / (math::sqrt(vx) * math::sqrt(vy)))
}

/// Encodes a categorical column against a quantitative partner: each row's
/// value becomes the mean of the partner over rows sharing its level.
/// Both columns must be fully observed.
pub fn encode_categorical_against(
    table: &MixedTable,
    qual: usize,
    quant: usize,
) -> Result<Vec<f64>, MetricsError> {
    let n_levels = table.column(qual).kind.level_count();
    let mut sums = alloc::vec![0.0f64; n_levels];
    let mut counts = alloc::vec![0usize; n_levels];
    for r in 0..table.n_rows() {
        let l = table
            .cell(r, qual)
            .as_level()
            .ok_or_else(|| MetricsError::NotObserved(table.column(qual).name.clone()))?;
        let v = table
            .cell(r, quant)
            .as_number()
            .ok_or_else(|| MetricsError::NotObserved(table.column(quant).name.clone()))?;
        sums[l] += v;
        counts[l] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    Ok((0..table.n_rows())
        .map(|r| means[table.cell(r, qual).as_level().unwrap()])
        .collect())
}

/// Which denominator Eq-style skewness uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SkewVariant {
    /// Third central absolute-correlation moment divided by `sd_abs`.
    AsWritten,
    /// Divided by `sd_abs^3` (the conventional standardized form). This is
    /// the variant that reproduces the published reference table and is the
    /// documented default.
    #[default]
    Standardized,
}

/// Moment summaries of the absolute pairwise correlation distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralIndices {
    pub rho_abs: f64,
    pub sd_abs: f64,
    pub skew_abs: f64,
    /// Attribute count of the table.
    pub p: usize,
    /// Column pairs actually entering the summaries (qual-qual pairs are
    /// excluded because the mean-encoding needs a quantitative partner).
    pub n_pairs: usize,
    pub skew_variant: SkewVariant,
}

/// Absolute pairwise correlations of a complete table. Quant-quant pairs use
/// Pearson directly; qual-quant pairs encode the qualitative side first;
/// qual-qual pairs are skipped.
pub fn absolute_pair_correlations(table: &MixedTable) -> Result<Vec<f64>, MetricsError> {
    let p = table.n_cols();
    let mut cors = Vec::new();
    for j in 0..p {
        for l in (j + 1)..p {
            let r = match (
                table.column(j).kind.is_quantitative(),
                table.column(l).kind.is_quantitative(),
            ) {
                (true, true) => {
                    let x = full_column(table, j)?;
                    let y = full_column(table, l)?;
                    pearson(&x, &y).map_err(|e| constant_as_column(e, table, j, l))?
                }
                (false, true) => {
                    let x = encode_categorical_against(table, j, l)?;
                    let y = full_column(table, l)?;
                    pearson(&x, &y).map_err(|e| constant_as_column(e, table, j, l))?
                }
                (true, false) => {
                    let x = full_column(table, j)?;
                    let y = encode_categorical_against(table, l, j)?;
                    pearson(&x, &y).map_err(|e| constant_as_column(e, table, j, l))?
                }
                (false, false) => continue,
            };
            cors.push(math::abs(r));
        }
    }
    Ok(cors)
}

fn full_column(table: &MixedTable, c: usize) -> Result<Vec<f64>, MetricsError> {
    (0..table.n_rows())
        .map(|r| {
            table
                .cell(r, c)
                .as_number()
                .ok_or_else(|| MetricsError::NotObserved(table.column(c).name.clone()))
        })
        .collect()
}

fn constant_as_column(
    e: MetricsError,
    table: &MixedTable,
    j: usize,
    l: usize,
) -> MetricsError {
    match e {
        MetricsError::ConstantInput => MetricsError::ConstantColumn(alloc::format!(
            "{} or {}",
            table.column(j).name,
            table.column(l).name
        )),
        other => other,
    }
}

pub fn structural_indices(
    table: &MixedTable,
    variant: SkewVariant,
) -> Result<StructuralIndices, MetricsError> {
    let cors = absolute_pair_correlations(table)?;
    if cors.is_empty() {
        return Err(MetricsError::TooFewPairs);
    }
    let n = cors.len() as f64;
    let rho_abs = cors.iter().sum::<f64>() / n;
    let m2 = cors.iter().map(|c| (c - rho_abs) * (c - rho_abs)).sum::<f64>() / n;
    let sd_abs = math::sqrt(m2);
    let m3 = cors
        .iter()
        .map(|c| {
            let d = c - rho_abs;
            d * d * d
        })
        .sum::<f64>()
        / n;
    let skew_abs = if sd_abs == 0.0 {
        0.0
    } else {
        match variant {
            SkewVariant::AsWritten => m3 / sd_abs,
            SkewVariant::Standardized => m3 / (sd_abs * sd_abs * sd_abs),
        }
    };
    Ok(StructuralIndices {
        rho_abs,
        sd_abs,
        skew_abs,
        p: table.n_cols(),
        n_pairs: cors.len(),
        skew_variant: variant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrengthLabel {
    Strong,
    Moderate,
    Weak,
}

/// Labels a correlation by magnitude: >= 0.65 strong, >= 0.35 moderate,
/// weak below (midpoints between the conventional 0.8 / 0.5 / 0.2 anchors).
pub fn strength_label(rho: f64) -> StrengthLabel {
    let a = math::abs(rho);
    debug_assert!(a <= 1.0 + 1e-12);
    if a >= 0.65 {
        StrengthLabel::Strong
    } else if a >= 0.35 {
        StrengthLabel::Moderate
    } else {
        StrengthLabel::Weak
    }
}

/// Relative gap `(x - x_ref) / x_ref`.
pub fn relative_gap(x: f64, x_ref: f64) -> Result<f64, MetricsError> {
    if x_ref == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok((x - x_ref) / x_ref)
}

/// Five-number summary with 1.5 IQR whiskers, mean and sample sd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub n: usize,
}

/// Quartiles by linear interpolation between order statistics; whiskers are
/// the outermost data points within 1.5 IQR of the quartiles; sd uses the
/// n-1 divisor (0 for a single sample).
pub fn boxplot_stats(samples: &[f64]) -> BoxplotStats {
    assert!(!samples.is_empty(), "boxplot_stats needs at least one value");
    let mut s: Vec<f64> = samples.to_vec();
    s.sort_by(|a, b| math::cmp_f64(*a, *b));
    let n = s.len();
    let quantile = |p: f64| -> f64 {
        let h = p * (n - 1) as f64;
        let lo = libm::floor(h) as usize;
        let hi = libm::ceil(h) as usize;
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    let q1 = quantile(0.25);
    let median = quantile(0.5);
    let q3 = quantile(0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_low = *s.iter().find(|&&v| v >= lo_fence).unwrap_or(&s[0]);
    let whisker_high = *s.iter().rev().find(|&&v| v <= hi_fence).unwrap_or(&s[n - 1]);
    let mean = s.iter().sum::<f64>() / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        math::sqrt(s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
    };
    BoxplotStats {
        min: s[0],
        q1,
        median,
        q3,
        max: s[n - 1],
        mean,
        sd,
        whisker_low,
        whisker_high,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, ColumnMeta};
    use alloc::borrow::ToOwned;
    use alloc::vec;

    fn table2(xs: &[f64], ys: &[f64]) -> MixedTable {
        let cols = vec![
            ColumnMeta {
                name: "x".to_owned(),
                kind: ColumnKind::Quantitative,
            },
            ColumnMeta {
                name: "y".to_owned(),
                kind: ColumnKind::Quantitative,
            },
        ];
        let mut cells = Vec::new();
        for (a, b) in xs.iter().zip(ys) {
            cells.push(Cell::Number(*a));
            cells.push(Cell::Number(*b));
        }
        MixedTable::new(cols, xs.len(), cells).unwrap()
    }

    #[test]
    fn pearson_identities() {
        let x = [1.0, 2.0, 4.5, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_value() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 7.0];
        // cov 5, sd_x sqrt(2), sd_y sqrt(38/3)
        let expected = 5.0 / (2.0f64 * 38.0 / 3.0).sqrt();
        assert!((pearson(&x, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn encode_levels_to_group_means() {
        let cols = vec![
            ColumnMeta {
                name: "c".to_owned(),
                kind: ColumnKind::Categorical {
                    levels: vec!["A".to_owned(), "B".to_owned()],
                    ordered: false,
                },
            },
            ColumnMeta {
                name: "q".to_owned(),
                kind: ColumnKind::Quantitative,
            },
        ];
        let t = MixedTable::new(
            cols,
            3,
            vec![
                Cell::Level(0),
                Cell::Number(1.0),
                Cell::Level(0),
                Cell::Number(3.0),
                Cell::Level(1),
                Cell::Number(5.0),
            ],
        )
        .unwrap();
        assert_eq!(
            encode_categorical_against(&t, 0, 1).unwrap(),
            vec![2.0, 2.0, 5.0]
        );
    }

    #[test]
    fn nrmse_hand_case() {
        // truth {2, 4}, imputed {3, 3}: mean sq diff 1, population var 1
        let complete = table2(&[2.0, 4.0], &[0.0, 0.0]);
        let mut cells = complete.cells_vec();
        cells[0] = Cell::Missing;
        cells[2] = Cell::Missing;
        let holed = complete.with_cells(cells).unwrap();
        let mask = MissingMask::from_table(&holed);
        let mut cells = complete.cells_vec();
        cells[0] = Cell::Number(3.0);
        cells[2] = Cell::Number(3.0);
        let imputed = complete.with_cells(cells).unwrap();
        let v = nrmse(&complete, &imputed, &mask).unwrap().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nrmse_scale_invariant() {
        let complete = table2(&[2.0, 4.0, 8.0], &[1.0, 1.0, 1.0]);
        let imputed = table2(&[3.0, 3.5, 9.0], &[1.0, 1.0, 1.0]);
        let mut cells = complete.cells_vec();
        for i in [0, 2, 4] {
            cells[i] = Cell::Missing;
        }
        let holed = complete.with_cells(cells).unwrap();
        let mask = MissingMask::from_table(&holed);
        let a = nrmse(&complete, &imputed, &mask).unwrap().unwrap();
        let scale = |t: &MixedTable| {
            let cells = t
                .cells()
                .iter()
                .map(|c| match c {
                    Cell::Number(v) => Cell::Number(v * 17.5),
                    other => *other,
                })
                .collect();
            t.with_cells(cells).unwrap()
        };
        let b = nrmse(&scale(&complete), &scale(&imputed), &mask)
            .unwrap()
            .unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pfc_quarter() {
        let cols = vec![ColumnMeta {
            name: "c".to_owned(),
            kind: ColumnKind::Categorical {
                levels: vec!["A".to_owned(), "B".to_owned()],
                ordered: false,
            },
        }];
        let complete = MixedTable::new(
            cols.clone(),
            4,
            vec![Cell::Level(0), Cell::Level(0), Cell::Level(1), Cell::Level(1)],
        )
        .unwrap();
        let holed = complete
            .with_cells(vec![Cell::Missing; 4])
            .unwrap();
        let mask = MissingMask::from_table(&holed);
        let imputed = MixedTable::new(
            cols,
            4,
            vec![Cell::Level(0), Cell::Level(0), Cell::Level(1), Cell::Level(0)],
        )
        .unwrap();
        assert_eq!(pfc(&complete, &imputed, &mask).unwrap(), Some(0.25));
    }

    #[test]
    fn labels() {
        assert_eq!(strength_label(0.8), StrengthLabel::Strong);
        assert_eq!(strength_label(-0.5), StrengthLabel::Moderate);
        assert_eq!(strength_label(0.0), StrengthLabel::Weak);
    }

    #[test]
    fn gap_values() {
        assert_eq!(relative_gap(2.5, 1.0).unwrap(), 1.5);
        assert_eq!(relative_gap(0.5, 1.0).unwrap(), -0.5);
        assert_eq!(relative_gap(3.0, 3.0).unwrap(), 0.0);
        assert!(relative_gap(1.0, 0.0).is_err());
    }

    #[test]
    fn gap_reciprocal_identity() {
        let (a, b) = (0.37, 2.11);
        let d1 = relative_gap(a, b).unwrap();
        let d2 = relative_gap(b, a).unwrap();
        assert!(((1.0 + d1) * (1.0 + d2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boxplot_interpolated_quartiles() {
        let st = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((st.q1, st.median, st.q3), (2.0, 3.0, 4.0));
        assert_eq!((st.min, st.max), (1.0, 5.0));
    }

    #[test]
    fn boxplot_outlier_clamped() {
        let st = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert_eq!(st.whisker_high, 4.0);
        assert_eq!(st.max, 100.0);
    }

    #[test]
    fn boxplot_constant() {
        let st = boxplot_stats(&[2.0, 2.0, 2.0]);
        assert_eq!((st.q1, st.median, st.q3, st.sd), (2.0, 2.0, 2.0, 0.0));
    }

    #[test]
    fn perfectly_correlated_pair() {
        let t = table2(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        let idx = structural_indices(&t, SkewVariant::Standardized).unwrap();
        assert!((idx.rho_abs - 1.0).abs() < 1e-12);
        assert!(idx.sd_abs.abs() < 1e-12);
        assert_eq!(idx.skew_abs, 0.0);
    }
}
