//! Property suites: Gower axioms, containment of imputed values, donor
//! membership, amputation contracts, and metric identities on random
//! tables.

use mixfill_core::knn::{gower_similarity, ColumnRanges};
use mixfill_core::metrics;
use mixfill_core::table::{Cell, ColumnKind, ColumnMeta, MissingMask};
use mixfill_core::{
    ampute_mcar, knn_impute, mice_impute, missforest_impute, AmputationSpec, ForestParams,
    KnnParams, MiceParams, MixedTable,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum ColGen {
    Quant(Vec<f64>),
    Cat { levels: usize, values: Vec<usize> },
}

fn table_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = MixedTable> {
    let rows = 4..=max_rows;
    rows.prop_flat_map(move |n| {
        let col = prop_oneof![
            proptest::collection::vec(-50.0f64..50.0, n).prop_map(ColGen::Quant),
            (2usize..=3).prop_flat_map(move |levels| {
                proptest::collection::vec(0..levels, n)
                    .prop_map(move |values| ColGen::Cat { levels, values })
            }),
        ];
        proptest::collection::vec(col, 2..=max_cols).prop_map(move |cols| build_table(n, cols))
    })
}

fn build_table(n: usize, cols: Vec<ColGen>) -> MixedTable {
    let metas: Vec<ColumnMeta> = cols
        .iter()
        .enumerate()
        .map(|(i, c)| ColumnMeta {
            name: format!("c{i}"),
            kind: match c {
                ColGen::Quant(_) => ColumnKind::Quantitative,
                ColGen::Cat { levels, .. } => ColumnKind::Categorical {
                    levels: (0..*levels).map(|l| format!("L{l}")).collect(),
                    ordered: false,
                },
            },
        })
        .collect();
    let mut cells = Vec::with_capacity(n * cols.len());
    for r in 0..n {
        for c in &cols {
            cells.push(match c {
                ColGen::Quant(v) => Cell::Number(v[r]),
                ColGen::Cat { values, .. } => Cell::Level(values[r]),
            });
        }
    }
    MixedTable::new(metas, n, cells).unwrap()
}

fn ampute_some(table: &MixedTable, seed: u64) -> Option<(MixedTable, MissingMask)> {
    ampute_mcar(table, &AmputationSpec::new(0.1, seed)).ok()
}

fn column_bounds(table: &MixedTable, c: usize) -> (f64, f64) {
    let vals = table.observed_numbers(c);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn assert_contained(holed: &MixedTable, imputed: &MixedTable) {
    assert!(!imputed.has_missing());
    for c in 0..holed.n_cols() {
        match &holed.column(c).kind {
            ColumnKind::Quantitative => {
                let (lo, hi) = column_bounds(holed, c);
                for r in 0..holed.n_rows() {
                    if holed.cell(r, c).is_missing() {
                        let v = imputed.cell(r, c).as_number().unwrap();
                        assert!(
                            (lo..=hi).contains(&v),
                            "column {c} imputed {v} outside [{lo}, {hi}]"
                        );
                    }
                }
            }
            ColumnKind::Categorical { .. } => {
                let observed = holed.observed_levels(c);
                for r in 0..holed.n_rows() {
                    if holed.cell(r, c).is_missing() {
                        let l = imputed.cell(r, c).as_level().unwrap();
                        assert!(observed.contains(&l), "column {c} imputed unseen level {l}");
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gower_axioms(table in table_strategy(8, 4)) {
        let ranges = ColumnRanges::from_table(&table);
        for a in 0..table.n_rows() {
            let s_self = gower_similarity(&table, a, a, &ranges, &[]).unwrap();
            prop_assert!((s_self - 1.0).abs() < 1e-12);
            for b in 0..table.n_rows() {
                let ab = gower_similarity(&table, a, b, &ranges, &[]);
                let ba = gower_similarity(&table, b, a, &ranges, &[]);
                prop_assert_eq!(ab, ba);
                if let Some(s) = ab {
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
                }
            }
        }
    }

    #[test]
    fn knn_containment(table in table_strategy(10, 4), seed in 0u64..1000) {
        if let Some((holed, _)) = ampute_some(&table, seed) {
            if let Ok(out) = knn_impute(&holed, &KnnParams::default()) {
                assert_contained(&holed, &out.table);
            }
        }
    }

    #[test]
    fn ampute_contract(table in table_strategy(10, 4), seed in 0u64..1000) {
        let spec = AmputationSpec::new(0.15, seed);
        if let Ok((holed, mask)) = ampute_mcar(&table, &spec) {
            let target = ((0.15 * (table.n_rows() * table.n_cols()) as f64) + 0.5).floor() as usize;
            prop_assert_eq!(mask.len(), target);
            prop_assert_eq!(holed.missing_count(), target);
            // determinism
            let (again, mask2) = ampute_mcar(&table, &spec).unwrap();
            prop_assert_eq!(holed, again);
            prop_assert_eq!(mask.len(), mask2.len());
        }
    }

    #[test]
    fn pearson_affine_invariance(
        xs in proptest::collection::vec(-100.0f64..100.0, 4..12),
        a in 0.1f64..5.0,
        b in -10.0f64..10.0,
    ) {
        let ys: Vec<f64> = xs.iter().rev().map(|v| v * 0.5 + 1.0).collect();
        if let (Ok(r1), Ok(r2)) = (
            metrics::pearson(&xs, &ys),
            metrics::pearson(&xs.iter().map(|v| a * v + b).collect::<Vec<_>>(), &ys),
        ) {
            prop_assert!((r1 - r2).abs() < 1e-9);
            let flipped = metrics::pearson(
                &xs.iter().map(|v| -v).collect::<Vec<_>>(), &ys).unwrap();
            prop_assert!((r1 + flipped).abs() < 1e-9);
        }
    }

    #[test]
    fn boxplot_ordering(samples in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
        let s = metrics::boxplot_stats(&samples);
        prop_assert!(s.min <= s.q1 + 1e-12);
        prop_assert!(s.q1 <= s.median + 1e-12);
        prop_assert!(s.median <= s.q3 + 1e-12);
        prop_assert!(s.q3 <= s.max + 1e-12);
        prop_assert!(s.whisker_low >= s.min - 1e-12 && s.whisker_high <= s.max + 1e-12);
    }

    #[test]
    fn nrmse_zero_on_identity(table in table_strategy(8, 4), seed in 0u64..1000) {
        if let Some((_, mask)) = ampute_some(&table, seed) {
            let scores = metrics::error_scores(&table, &table, &mask).unwrap();
            if let Some(v) = scores.nrmse { prop_assert_eq!(v, 0.0); }
            if let Some(v) = scores.pfc { prop_assert_eq!(v, 0.0); }
        }
    }
}

proptest! {
    // imputation loops are costlier; fewer cases
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn missforest_containment(table in table_strategy(10, 4), seed in 0u64..100) {
        if let Some((holed, _)) = ampute_some(&table, seed) {
            let params = ForestParams { ntree: 5, seed, ..ForestParams::default() };
            if let Ok(out) = missforest_impute(&holed, &params) {
                assert_contained(&holed, &out.table);
            }
        }
    }

    #[test]
    fn mice_containment_and_donor_membership(table in table_strategy(12, 3), seed in 0u64..100) {
        if let Some((holed, _)) = ampute_some(&table, seed) {
            let params = MiceParams { m: 2, maxit: 2, seed, ..MiceParams::default() };
            if let Ok(out) = mice_impute(&holed, &params) {
                // every chain's quantitative imputation is an observed value (PMM)
                for chain in &out.chains {
                    for c in 0..holed.n_cols() {
                        if holed.column(c).kind.is_quantitative() {
                            let observed = holed.observed_numbers(c);
                            for r in 0..holed.n_rows() {
                                if holed.cell(r, c).is_missing() {
                                    let v = chain.cell(r, c).as_number().unwrap();
                                    prop_assert!(observed.contains(&v));
                                }
                            }
                        }
                    }
                }
                assert_contained(&holed, &out.pooled.table);
            }
        }
    }
}

#[test]
fn knn_row_permutation_invariant() {
    // distinct random values make distance ties measure-zero
    use rand::Rng;
    let mut rng = mixfill_core::SeededRng::new(99).child("perm").stream();
    let n = 12;
    let cols: Vec<ColumnMeta> = (0..3)
        .map(|i| ColumnMeta {
            name: format!("c{i}"),
            kind: ColumnKind::Quantitative,
        })
        .collect();
    let mut cells: Vec<Cell> = (0..n * 3)
        .map(|_| Cell::Number(rng.random::<f64>() * 100.0))
        .collect();
    cells[4] = Cell::Missing;
    let table = MixedTable::new(cols.clone(), n, cells.clone()).unwrap();
    let imputed = knn_impute(&table, &KnnParams::default()).unwrap().table;

    let perm: Vec<usize> = (0..n).rev().collect();
    let mut permuted_cells = Vec::with_capacity(n * 3);
    for &r in &perm {
        for c in 0..3 {
            permuted_cells.push(cells[r * 3 + c]);
        }
    }
    let permuted = MixedTable::new(cols, n, permuted_cells).unwrap();
    let imputed_perm = knn_impute(&permuted, &KnnParams::default()).unwrap().table;
    let where_now = perm.iter().position(|&r| r == 1).unwrap();
    assert_eq!(imputed.cell(1, 1), imputed_perm.cell(where_now, 1));
}

#[test]
fn pool_chain_permutation_invariant_quantitative() {
    let cols = vec![ColumnMeta {
        name: "q".to_string(),
        kind: ColumnKind::Quantitative,
    }];
    let mk = |v: f64| MixedTable::new(cols.clone(), 1, vec![Cell::Number(v)]).unwrap();
    let a = [mk(1.0), mk(2.5), mk(4.0)];
    let b = [mk(4.0), mk(1.0), mk(2.5)];
    assert_eq!(
        mixfill_core::pool(&a).unwrap(),
        mixfill_core::pool(&b).unwrap()
    );
}
