//! Mixed-type tabular data model.
//!
//! A [`MixedTable`] is an immutable grid of [`Cell`]s with per-column type
//! metadata. Categorical levels are closed: the set of admissible levels is
//! fixed by the column's [`ColumnKind`] and never grows during imputation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Column type: real-valued or categorical with a closed, ordered level list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Quantitative,
    Categorical {
        /// Distinct level names; cell values index into this list.
        levels: Vec<String>,
        /// Whether the levels carry a meaningful order (ordinal data).
        ordered: bool,
    },
}

impl ColumnKind {
    pub fn is_quantitative(&self) -> bool {
        matches!(self, ColumnKind::Quantitative)
    }

    pub fn is_categorical(&self) -> bool {
        !self.is_quantitative()
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            ColumnKind::Quantitative => None,
            ColumnKind::Categorical { levels, .. } => Some(levels),
        }
    }

    pub fn level_count(&self) -> usize {
        self.levels().map_or(0, <[String]>::len)
    }

    pub fn is_ordered(&self) -> bool {
        matches!(self, ColumnKind::Categorical { ordered: true, .. })
    }
}

/// One table entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    /// Finite real value.
    Number(f64),
    /// Index into the column's level list.
    Level(usize),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_level(&self) -> Option<usize> {
        match self {
            Cell::Level(i) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column {column}: categorical needs at least 2 distinct levels")]
    TooFewLevels { column: usize },
    #[error("column {column}: duplicate level name `{level}`")]
    DuplicateLevel { column: usize, level: String },
    #[error("cell ({row}, {column}) does not match the column kind")]
    KindMismatch { row: usize, column: usize },
    #[error("cell ({row}, {column}) is not a finite number")]
    NonFinite { row: usize, column: usize },
    #[error("cell ({row}, {column}) level index {index} out of range")]
    LevelOutOfRange {
        row: usize,
        column: usize,
        index: usize,
    },
    #[error("cell grid has wrong length: expected {expected}, got {got}")]
    BadGrid { expected: usize, got: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("masked position ({row}, {column}) is not a missing cell")]
    MaskNotMissing { row: usize, column: usize },
    #[error("key column `{0}` must be categorical")]
    KeyNotCategorical(String),
    #[error("dropping sparse columns would leave an empty table")]
    AllColumnsDropped,
}

/// Immutable mixed-type table. Row-major cell storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedTable {
    n_rows: usize,
    columns: Vec<ColumnMeta>,
    cells: Vec<Cell>,
}

impl MixedTable {
    /// Builds a table, validating the cell grid against the column kinds.
    pub fn new(
        columns: Vec<ColumnMeta>,
        n_rows: usize,
        cells: Vec<Cell>,
    ) -> Result<Self, TableError> {
        let mut seen = BTreeSet::new();
        for (ci, col) in columns.iter().enumerate() {
            if !seen.insert(col.name.clone()) {
                return Err(TableError::DuplicateColumn(col.name.clone()));
            }
            if let ColumnKind::Categorical { levels, .. } = &col.kind {
                if levels.len() < 2 {
                    return Err(TableError::TooFewLevels { column: ci });
                }
                let mut lv = BTreeSet::new();
                for l in levels {
                    if !lv.insert(l.clone()) {
                        return Err(TableError::DuplicateLevel {
                            column: ci,
                            level: l.clone(),
                        });
                    }
                }
            }
        }
        let expected = n_rows * columns.len();
        if cells.len() != expected {
            return Err(TableError::BadGrid {
                expected,
                got: cells.len(),
            });
        }
        let table = MixedTable {
            n_rows,
            columns,
            cells,
        };
        for r in 0..table.n_rows {
            for c in 0..table.n_cols() {
                match (table.cell(r, c), &table.columns[c].kind) {
                    (Cell::Missing, _) => {}
                    (Cell::Number(v), ColumnKind::Quantitative) => {
                        if !v.is_finite() {
                            return Err(TableError::NonFinite { row: r, column: c });
                        }
                    }
                    (Cell::Level(i), ColumnKind::Categorical { levels, .. }) => {
                        if *i >= levels.len() {
                            return Err(TableError::LevelOutOfRange {
                                row: r,
                                column: c,
                                index: *i,
                            });
                        }
                    }
                    _ => return Err(TableError::KindMismatch { row: r, column: c }),
                }
            }
        }
        Ok(table)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn column(&self, c: usize) -> &ColumnMeta {
        &self.columns[c]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|col| col.name == name)
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * self.columns.len() + col]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Copy of the grid, for callers that rebuild a modified table.
    pub fn cells_vec(&self) -> Vec<Cell> {
        self.cells.clone()
    }

    /// Rebuilds a table with the same schema and a new grid.
    pub fn with_cells(&self, cells: Vec<Cell>) -> Result<Self, TableError> {
        MixedTable::new(self.columns.clone(), self.n_rows, cells)
    }

    pub fn has_missing(&self) -> bool {
        self.cells.iter().any(Cell::is_missing)
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
    }

    /// Observed (non-missing) values of a quantitative column.
    pub fn observed_numbers(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows)
            .filter_map(|r| self.cell(r, col).as_number())
            .collect()
    }

    /// Observed level indices of a categorical column.
    pub fn observed_levels(&self, col: usize) -> Vec<usize> {
        (0..self.n_rows)
            .filter_map(|r| self.cell(r, col).as_level())
            .collect()
    }

    /// Per-column missing fractions plus the overall fraction.
    pub fn column_missingness(&self) -> (Vec<f64>, f64) {
        let mut per = Vec::with_capacity(self.n_cols());
        let mut total = 0usize;
        for c in 0..self.n_cols() {
            let m = (0..self.n_rows)
                .filter(|&r| self.cell(r, c).is_missing())
                .count();
            total += m;
            per.push(m as f64 / self.n_rows as f64);
        }
        let overall = total as f64 / (self.n_rows * self.n_cols()) as f64;
        (per, overall)
    }

    /// Missing fraction of the sub-table formed by the first k listed columns,
    /// for each prefix k = 1..=len.
    pub fn cumulative_missingness(&self, column_order: &[&str]) -> Result<Vec<f64>, TableError> {
        let mut indices = Vec::with_capacity(column_order.len());
        for name in column_order {
            let idx = self
                .column_index(name)
                .ok_or_else(|| TableError::UnknownColumn(String::from(*name)))?;
            indices.push(idx);
        }
        let mut out = Vec::with_capacity(indices.len());
        let mut missing = 0usize;
        for (k, &c) in indices.iter().enumerate() {
            missing += (0..self.n_rows)
                .filter(|&r| self.cell(r, c).is_missing())
                .count();
            out.push(missing as f64 / (self.n_rows * (k + 1)) as f64);
        }
        Ok(out)
    }

    /// Removes columns whose missing fraction exceeds `threshold`.
    /// Returns the reduced table and the dropped column names.
    pub fn drop_sparse_columns(&self, threshold: f64) -> Result<(Self, Vec<String>), TableError> {
        assert!(threshold > 0.0 && threshold <= 1.0, "threshold in (0, 1]");
        let (fractions, _) = self.column_missingness();
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&c| fractions[c] <= threshold)
            .collect();
        if keep.is_empty() {
            return Err(TableError::AllColumnsDropped);
        }
        let dropped = (0..self.n_cols())
            .filter(|c| !keep.contains(c))
            .map(|c| self.columns[c].name.clone())
            .collect();
        Ok((self.select_columns(&keep), dropped))
    }

    /// Sub-table with the given column indices, preserving order of `keep`.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let columns = keep.iter().map(|&c| self.columns[c].clone()).collect();
        let mut cells = Vec::with_capacity(self.n_rows * keep.len());
        for r in 0..self.n_rows {
            for &c in keep {
                cells.push(*self.cell(r, c));
            }
        }
        MixedTable {
            n_rows: self.n_rows,
            columns,
            cells,
        }
    }

    /// Sub-table with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            for c in 0..self.n_cols() {
                cells.push(*self.cell(r, c));
            }
        }
        MixedTable {
            n_rows: rows.len(),
            columns: self.columns.clone(),
            cells,
        }
    }

    /// Groups rows by the key column's level and aggregates every other
    /// column within each group: mean for quantitative columns (Missing when
    /// no value is observed in the group), mode for categorical columns with
    /// ties broken by the lowest level index. One output row per observed key
    /// level, in level order.
    pub fn group_mean_aggregate(&self, key_column: &str) -> Result<Self, TableError> {
        let key = self
            .column_index(key_column)
            .ok_or_else(|| TableError::UnknownColumn(String::from(key_column)))?;
        let n_levels = match &self.columns[key].kind {
            ColumnKind::Categorical { levels, .. } => levels.len(),
            ColumnKind::Quantitative => {
                return Err(TableError::KeyNotCategorical(String::from(key_column)))
            }
        };
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for r in 0..self.n_rows {
            if let Some(level) = self.cell(r, key).as_level() {
                groups.entry(level).or_default().push(r);
            }
        }
        debug_assert!(groups.len() <= n_levels);
        let mut cells = Vec::with_capacity(groups.len() * self.n_cols());
        for (&level, rows) in &groups {
            for c in 0..self.n_cols() {
                if c == key {
                    cells.push(Cell::Level(level));
                    continue;
                }
                match &self.columns[c].kind {
                    ColumnKind::Quantitative => {
                        let vals: Vec<f64> = rows
                            .iter()
                            .filter_map(|&r| self.cell(r, c).as_number())
                            .collect();
                        if vals.is_empty() {
                            cells.push(Cell::Missing);
                        } else {
                            cells.push(Cell::Number(
                                vals.iter().sum::<f64>() / vals.len() as f64,
                            ));
                        }
                    }
                    ColumnKind::Categorical { levels, .. } => {
                        let mut counts = alloc::vec![0usize; levels.len()];
                        let mut any = false;
                        for &r in rows {
                            if let Some(l) = self.cell(r, c).as_level() {
                                counts[l] += 1;
                                any = true;
                            }
                        }
                        if !any {
                            cells.push(Cell::Missing);
                        } else {
                            let best = counts
                                .iter()
                                .enumerate()
                                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                                .map(|(i, _)| i)
                                .unwrap();
                            cells.push(Cell::Level(best));
                        }
                    }
                }
            }
        }
        Ok(MixedTable {
            n_rows: groups.len(),
            columns: self.columns.clone(),
            cells,
        })
    }
}

/// Whether a missing position was present in the source data or introduced
/// by amputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Amputed,
}

/// Record of missing (row, column) positions with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingMask {
    positions: BTreeMap<(usize, usize), Provenance>,
}

impl MissingMask {
    /// Builds a mask, checking every position is Missing in `table`.
    pub fn new(
        table: &MixedTable,
        positions: impl IntoIterator<Item = ((usize, usize), Provenance)>,
    ) -> Result<Self, TableError> {
        let mut map = BTreeMap::new();
        for ((r, c), p) in positions {
            if !table.cell(r, c).is_missing() {
                return Err(TableError::MaskNotMissing { row: r, column: c });
            }
            map.insert((r, c), p);
        }
        Ok(MissingMask { positions: map })
    }

    /// Mask of every missing cell in `table`, all tagged `Original`.
    pub fn from_table(table: &MixedTable) -> Self {
        let mut map = BTreeMap::new();
        for r in 0..table.n_rows() {
            for c in 0..table.n_cols() {
                if table.cell(r, c).is_missing() {
                    map.insert((r, c), Provenance::Original);
                }
            }
        }
        MissingMask { positions: map }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.positions.contains_key(&(row, col))
    }

    pub fn provenance(&self, row: usize, col: usize) -> Option<Provenance> {
        self.positions.get(&(row, col)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Provenance)> + '_ {
        self.positions.iter().map(|(&(r, c), &p)| (r, c, p))
    }

    /// Positions tagged `Amputed`, in row-major order.
    pub fn amputed(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.iter()
            .filter(|(_, _, p)| *p == Provenance::Amputed)
            .map(|(r, c, _)| (r, c))
    }
}
