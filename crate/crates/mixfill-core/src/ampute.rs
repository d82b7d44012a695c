//! MCAR amputation: remove an exact number of cells uniformly at random.

use alloc::vec::Vec;

use rand::Rng;

use crate::rng::SeededRng;
use crate::table::{Cell, MissingMask, MixedTable, Provenance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmputationSpec {
    /// Target missing share of all cells, in (0, 1).
    pub fraction: f64,
    pub seed: u64,
    /// Every column must keep at least this many observed cells.
    pub min_observed_per_column: usize,
    /// Whole-draw resampling attempts before giving up.
    pub max_retries: usize,
}

impl AmputationSpec {
    pub fn new(fraction: f64, seed: u64) -> Self {
        AmputationSpec {
            fraction,
            seed,
            min_observed_per_column: 2,
            max_retries: 100,
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AmputeError {
    #[error("input table already has missing cells")]
    NotComplete,
    #[error("fraction must lie in (0, 1)")]
    BadFraction,
    #[error("target count {target} exceeds feasible maximum {max}")]
    FractionTooLarge { target: usize, max: usize },
    #[error("target count rounds to zero cells")]
    NothingToRemove,
    #[error("could not satisfy the column floor in {0} attempts")]
    RetriesExhausted(usize),
}

fn round_half_up(x: f64) -> usize {
    libm::floor(x + 0.5) as usize
}

/// Sets exactly `round(fraction * n * p)` cells of a complete table to
/// Missing, drawn uniformly without replacement. Draws violating the
/// per-column observed floor are rejected wholesale and resampled, which
/// keeps the accepted draw uniform over feasible masks.
pub fn ampute_mcar(
    table: &MixedTable,
    spec: &AmputationSpec,
) -> Result<(MixedTable, MissingMask), AmputeError> {
    if table.has_missing() {
        return Err(AmputeError::NotComplete);
    }
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(AmputeError::BadFraction);
    }
    let (n, p) = (table.n_rows(), table.n_cols());
    let total = n * p;
    let target = round_half_up(spec.fraction * total as f64);
    if target == 0 {
        return Err(AmputeError::NothingToRemove);
    }
    let floor = spec.min_observed_per_column;
    let max = total.saturating_sub(floor * p);
    if target > max {
        return Err(AmputeError::FractionTooLarge { target, max });
    }

    let mut rng = SeededRng::new(spec.seed).child("ampute").stream();
    let mut indices: Vec<usize> = (0..total).collect();
    for attempt in 0..spec.max_retries {
        let _ = attempt;
        // partial Fisher-Yates: first `target` entries form the draw
        for i in 0..target {
            let j = rng.random_range(i..total);
            indices.swap(i, j);
        }
        let draw = &indices[..target];
        let mut removed_per_col = alloc::vec![0usize; p];
        for &idx in draw {
            removed_per_col[idx % p] += 1;
        }
        let ok = removed_per_col.iter().all(|&m| n - m >= floor);
        if !ok {
            continue;
        }
        let mut cells = table.cells_vec();
        for &idx in draw {
            cells[idx] = Cell::Missing;
        }
        let amputed = table
            .with_cells(cells)
            .expect("amputed grid keeps the schema");
        let mask = MissingMask::new(
            &amputed,
            draw.iter().map(|&idx| ((idx / p, idx % p), Provenance::Amputed)),
        )
        .expect("mask positions are missing by construction");
        return Ok((amputed, mask));
    }
    Err(AmputeError::RetriesExhausted(spec.max_retries))
}
