//! Nearest-neighbor imputation over Gower similarity.

use alloc::vec::Vec;

use crate::math;
use crate::result::ImputationResult;
use crate::table::{Cell, ColumnKind, MixedTable};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum KnnError {
    #[error("column `{0}` has no observed values")]
    NoDonor(alloc::string::String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Observed (min, max) per quantitative column; None for categorical ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRanges {
    ranges: Vec<Option<(f64, f64)>>,
}

impl ColumnRanges {
    pub fn from_table(table: &MixedTable) -> Self {
        let ranges = (0..table.n_cols())
            .map(|c| {
                if !table.column(c).kind.is_quantitative() {
                    return None;
                }
                let mut bounds: Option<(f64, f64)> = None;
                for r in 0..table.n_rows() {
                    if let Some(v) = table.cell(r, c).as_number() {
                        bounds = Some(match bounds {
                            None => (v, v),
                            Some((lo, hi)) => (if v < lo { v } else { lo }, if v > hi { v } else { hi }),
                        });
                    }
                }
                bounds.or(Some((0.0, 0.0)))
            })
            .collect();
        ColumnRanges { ranges }
    }

    fn span(&self, c: usize) -> Option<f64> {
        self.ranges[c].map(|(lo, hi)| hi - lo)
    }
}

/// Mean per-column agreement over columns observed in both rows (and not
/// excluded). Quantitative agreement is range-normalized; a zero-range column
/// counts as full agreement. `None` when no column is comparable.
pub fn gower_similarity(
    table: &MixedTable,
    a: usize,
    b: usize,
    ranges: &ColumnRanges,
    exclude: &[usize],
) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in 0..table.n_cols() {
        if exclude.contains(&c) {
            continue;
        }
        let contrib = match (table.cell(a, c), table.cell(b, c)) {
            (Cell::Number(x), Cell::Number(y)) => {
                let span = ranges.span(c).unwrap();
                if span == 0.0 {
                    1.0
                } else {
                    1.0 - math::abs(x - y) / span
                }
            }
            (Cell::Level(x), Cell::Level(y)) => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
            _ => continue,
        };
        sum += contrib;
        count += 1;
    }
    if count == 0 {
        None
    } else {
        Some(sum / count as f64)
    }
}

pub fn gower_distance(
    table: &MixedTable,
    a: usize,
    b: usize,
    ranges: &ColumnRanges,
    exclude: &[usize],
) -> Option<f64> {
    gower_similarity(table, a, b, ranges, exclude).map(|s| 1.0 - s)
}

/// Fills every missing cell from its k nearest donors: mean for quantitative
/// targets, majority vote (ties to the lowest level index) for categorical.
/// Donors with no comparable column rank behind every defined distance; equal
/// distances rank by original row index.
pub fn knn_impute(table: &MixedTable, params: &KnnParams) -> Result<ImputationResult, KnnError> {
    assert!(params.k >= 1, "k must be at least 1");
    for c in 0..table.n_cols() {
        if (0..table.n_rows()).all(|r| table.cell(r, c).is_missing()) {
            return Err(KnnError::NoDonor(table.column(c).name.clone()));
        }
    }
    let ranges = ColumnRanges::from_table(table);
    let mut cells = table.cells_vec();
    for r in 0..table.n_rows() {
        for c in 0..table.n_cols() {
            if !table.cell(r, c).is_missing() {
                continue;
            }
            // (undefined flag, distance, row): sorts defined distances first,
            // then by distance, then by row index.
            let mut donors: Vec<(bool, f64, usize)> = (0..table.n_rows())
                .filter(|&d| d != r && !table.cell(d, c).is_missing())
                .map(|d| match gower_distance(table, r, d, &ranges, &[c]) {
                    Some(dist) => (false, dist, d),
                    None => (true, 0.0, d),
                })
                .collect();
            donors.sort_by(|x, y| {
                x.0.cmp(&y.0)
                    .then(math::cmp_f64(x.1, y.1))
                    .then(x.2.cmp(&y.2))
            });
            donors.truncate(params.k);
            cells[r * table.n_cols() + c] = match &table.column(c).kind {
                ColumnKind::Quantitative => {
                    let sum: f64 = donors
                        .iter()
                        .map(|&(_, _, d)| table.cell(d, c).as_number().unwrap())
                        .sum();
                    Cell::Number(sum / donors.len() as f64)
                }
                ColumnKind::Categorical { levels, .. } => {
                    let mut votes = alloc::vec![0usize; levels.len()];
                    for &(_, _, d) in &donors {
                        votes[table.cell(d, c).as_level().unwrap()] += 1;
                    }
                    let best = votes
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                        .unwrap()
                        .0;
                    Cell::Level(best)
                }
            };
        }
    }
    let out = table.with_cells(cells).expect("imputed cells stay valid");
    Ok(ImputationResult::new(out, "knn"))
}
