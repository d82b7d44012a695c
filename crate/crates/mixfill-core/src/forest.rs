//! CART trees, bootstrap-bagged forests, the iterative forest imputation
//! loop with its stopping rule, and out-of-bag error estimation.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::math;
use crate::result::{Diagnostics, ImputationResult, OobEstimate, StoppingDeltas};
use crate::rng::SeededRng;
use crate::table::{Cell, ColumnKind, MixedTable};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ForestError {
    #[error("empty training set")]
    EmptyTraining,
    #[error("column `{0}` has no observed values")]
    AllMissingColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub ntree: usize,
    /// Candidate predictors per split; None means floor(sqrt(#predictors)).
    pub mtry: Option<usize>,
    pub min_node_regression: usize,
    pub min_node_classification: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            ntree: 100,
            mtry: None,
            min_node_regression: 5,
            min_node_classification: 1,
            max_iter: 10,
            seed: 0,
        }
    }
}

/// Predictor column description for tree fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    Quantitative,
    Categorical { levels: usize },
}

/// Training response.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Quantitative(Vec<f64>),
    Categorical { values: Vec<usize>, levels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitRule {
    /// Go left when value <= threshold.
    Threshold(f64),
    /// Go left when the level's flag is set.
    LevelSet(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf { value: LeafValue, count: usize },
    Split {
        column: usize,
        rule: SplitRule,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafValue {
    Number(f64),
    Level(usize),
}

/// Predictor rows shared by every tree of one fit: row-major, complete.
pub struct TrainingData<'a> {
    pub x: &'a [Cell],
    pub p: usize,
    pub kinds: &'a [PredictorKind],
    pub y: &'a Response,
}

impl TrainingData<'_> {
    fn value(&self, row: usize, col: usize) -> &Cell {
        &self.x[row * self.p + col]
    }
}

fn leaf_from(data: &TrainingData, rows: &[usize]) -> TreeNode {
    let value = match data.y {
        Response::Quantitative(y) => {
            let sum: f64 = rows.iter().map(|&r| y[r]).sum();
            LeafValue::Number(sum / rows.len() as f64)
        }
        Response::Categorical { values, levels } => {
            let mut counts = alloc::vec![0usize; *levels];
            for &r in rows {
                counts[values[r]] += 1;
            }
            LeafValue::Level(argmax_lowest(&counts))
        }
    };
    TreeNode::Leaf {
        value,
        count: rows.len(),
    }
}

fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn is_pure(data: &TrainingData, rows: &[usize]) -> bool {
    match data.y {
        Response::Quantitative(y) => rows.iter().all(|&r| y[r] == y[rows[0]]),
        Response::Categorical { values, .. } => {
            rows.iter().all(|&r| values[r] == values[rows[0]])
        }
    }
}

/// Node impurity scaled by count: SSE for regression, n * Gini for
/// classification. Split gain = parent score - child scores.
struct ImpurityAcc {
    n: f64,
    sum: f64,
    sumsq: f64,
    counts: Vec<usize>,
}

impl ImpurityAcc {
    fn new(levels: usize) -> Self {
        ImpurityAcc {
            n: 0.0,
            sum: 0.0,
            sumsq: 0.0,
            counts: alloc::vec![0; levels],
        }
    }

    fn add(&mut self, data: &TrainingData, row: usize) {
        self.n += 1.0;
        match data.y {
            Response::Quantitative(y) => {
                self.sum += y[row];
                self.sumsq += y[row] * y[row];
            }
            Response::Categorical { values, .. } => self.counts[values[row]] += 1,
        }
    }

    fn merge(&mut self, other: &ImpurityAcc) {
        self.n += other.n;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    fn score(&self, quantitative: bool) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        if quantitative {
            self.sumsq - self.sum * self.sum / self.n
        } else {
            let mut g = 1.0;
            for &c in &self.counts {
                let f = c as f64 / self.n;
                g -= f * f;
            }
            self.n * g
        }
    }
}

struct BestSplit {
    gain: f64,
    column: usize,
    rule: SplitRule,
}

fn best_split_for_column(
    data: &TrainingData,
    rows: &[usize],
    col: usize,
    parent_score: f64,
) -> Option<BestSplit> {
    let quant_y = matches!(data.y, Response::Quantitative(_));
    let levels = match data.y {
        Response::Categorical { levels, .. } => *levels,
        _ => 0,
    };
    match data.kinds[col] {
        PredictorKind::Quantitative => {
            let mut order: Vec<usize> = rows.to_vec();
            order.sort_by(|&a, &b| {
                math::cmp_f64(
                    data.value(a, col).as_number().unwrap(),
                    data.value(b, col).as_number().unwrap(),
                )
            });
            let mut left = ImpurityAcc::new(levels);
            let mut right = ImpurityAcc::new(levels);
            for &r in &order {
                right.add(data, r);
            }
            let mut best: Option<BestSplit> = None;
            for i in 0..order.len() - 1 {
                let r = order[i];
                left.add(data, r);
                // move r out of right
                right.n -= 1.0;
                match data.y {
                    Response::Quantitative(y) => {
                        right.sum -= y[r];
                        right.sumsq -= y[r] * y[r];
                    }
                    Response::Categorical { values, .. } => right.counts[values[r]] -= 1,
                }
                let v = data.value(r, col).as_number().unwrap();
                let next = data.value(order[i + 1], col).as_number().unwrap();
                if v == next {
                    continue;
                }
                let gain = parent_score - left.score(quant_y) - right.score(quant_y);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        column: col,
                        rule: SplitRule::Threshold((v + next) / 2.0),
                    });
                }
            }
            best
        }
        PredictorKind::Categorical { levels: n_lev } => {
            let mut per_level: Vec<ImpurityAcc> =
                (0..n_lev).map(|_| ImpurityAcc::new(levels)).collect();
            for &r in rows {
                per_level[data.value(r, col).as_level().unwrap()].add(data, r);
            }
            let masks: Vec<u32> = if n_lev <= 10 {
                // level 0 pinned right: each partition enumerated once
                (1..(1u32 << (n_lev - 1))).map(|m| m << 1).collect()
            } else {
                (0..n_lev as u32).map(|l| 1 << l).collect()
            };
            let mut best: Option<BestSplit> = None;
            for mask in masks {
                let mut left = ImpurityAcc::new(levels);
                let mut right = ImpurityAcc::new(levels);
                for (l, acc) in per_level.iter().enumerate() {
                    if mask & (1 << l) != 0 {
                        left.merge(acc);
                    } else {
                        right.merge(acc);
                    }
                }
                if left.n == 0.0 || right.n == 0.0 {
                    continue;
                }
                let gain = parent_score - left.score(quant_y) - right.score(quant_y);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        column: col,
                        rule: SplitRule::LevelSet(
                            (0..n_lev).map(|l| mask & (1 << l) != 0).collect(),
                        ),
                    });
                }
            }
            best
        }
    }
}

fn goes_left(rule: &SplitRule, cell: &Cell) -> bool {
    match (rule, cell) {
        (SplitRule::Threshold(t), Cell::Number(v)) => v <= t,
        (SplitRule::LevelSet(set), Cell::Level(l)) => set[*l],
        _ => panic!("split rule and cell type disagree"),
    }
}

/// Recursive greedy CART fit. At each node `mtry` candidate columns are
/// sampled without replacement; the best variance-reduction (regression) or
/// Gini-decrease (classification) split wins, ties going to the lowest
/// column index and lowest threshold.
pub fn fit_tree(
    data: &TrainingData,
    rows: &[usize],
    mtry: usize,
    min_node: usize,
    rng: &mut ChaCha12Rng,
) -> Result<TreeNode, ForestError> {
    if rows.is_empty() {
        return Err(ForestError::EmptyTraining);
    }
    Ok(fit_node(data, rows.to_vec(), mtry, min_node, rng))
}

fn fit_node(
    data: &TrainingData,
    rows: Vec<usize>,
    mtry: usize,
    min_node: usize,
    rng: &mut ChaCha12Rng,
) -> TreeNode {
    if rows.len() < 2 * min_node || rows.len() < 2 || is_pure(data, &rows) {
        return leaf_from(data, &rows);
    }
    // sample candidate columns, then scan them in index order
    let p = data.p;
    let mtry = mtry.clamp(1, p);
    let mut cols: Vec<usize> = (0..p).collect();
    for i in 0..mtry {
        let j = rng.random_range(i..p);
        cols.swap(i, j);
    }
    cols.truncate(mtry);
    cols.sort_unstable();
    let quant_y = matches!(data.y, Response::Quantitative(_));
    let levels = match data.y {
        Response::Categorical { levels, .. } => *levels,
        _ => 0,
    };
    let mut parent = ImpurityAcc::new(levels);
    for &r in &rows {
        parent.add(data, r);
    }
    let parent_score = parent.score(quant_y);
    let mut best: Option<BestSplit> = None;
    for col in cols {
        if let Some(cand) = best_split_for_column(data, &rows, col, parent_score) {
            if best.as_ref().is_none_or(|b| cand.gain > b.gain) {
                best = Some(cand);
            }
        }
    }
    match best {
        Some(split) if split.gain > 1e-12 => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&r| goes_left(&split.rule, data.value(r, split.column)));
            TreeNode::Split {
                column: split.column,
                rule: split.rule,
                left: Box::new(fit_node(data, left_rows, mtry, min_node, rng)),
                right: Box::new(fit_node(data, right_rows, mtry, min_node, rng)),
            }
        }
        _ => leaf_from(data, &rows),
    }
}

pub fn predict_tree<'a>(node: &'a TreeNode, row: &[Cell]) -> &'a LeafValue {
    match node {
        TreeNode::Leaf { value, .. } => value,
        TreeNode::Split {
            column,
            rule,
            left,
            right,
        } => {
            if goes_left(rule, &row[*column]) {
                predict_tree(left, row)
            } else {
                predict_tree(right, row)
            }
        }
    }
}

pub struct Forest {
    pub trees: Vec<TreeNode>,
    /// Bootstrap row multisets, one per tree (row ids as drawn).
    pub bootstraps: Vec<Vec<usize>>,
    /// Rows each tree never saw.
    pub oob: Vec<Vec<usize>>,
    pub response_levels: Option<usize>,
}

/// Bags `ntree` trees over bootstrap resamples of `rows`. Each tree's rng is
/// a labeled child of `parent`, so results do not depend on fit order.
/// `bootstrap_override` substitutes fixed samples (testing hook).
pub fn fit_forest(
    data: &TrainingData,
    rows: &[usize],
    params: &ForestParams,
    parent: &SeededRng,
    bootstrap_override: Option<&[Vec<usize>]>,
) -> Result<Forest, ForestError> {
    if rows.is_empty() {
        return Err(ForestError::EmptyTraining);
    }
    let mtry = params
        .mtry
        .unwrap_or_else(|| (math::sqrt(data.p as f64) as usize).max(1));
    let min_node = match data.y {
        Response::Quantitative(_) => params.min_node_regression,
        Response::Categorical { .. } => params.min_node_classification,
    };
    let mut trees = Vec::with_capacity(params.ntree);
    let mut bootstraps = Vec::with_capacity(params.ntree);
    let mut oob = Vec::with_capacity(params.ntree);
    for t in 0..params.ntree {
        let mut rng = parent.child(&format!("tree{t}")).stream();
        let sample: Vec<usize> = match bootstrap_override {
            Some(fixed) => fixed[t].clone(),
            None => (0..rows.len())
                .map(|_| rows[rng.random_range(0..rows.len())])
                .collect(),
        };
        let tree = fit_tree(data, &sample, mtry, min_node, &mut rng)?;
        let out: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|r| !sample.contains(r))
            .collect();
        trees.push(tree);
        bootstraps.push(sample);
        oob.push(out);
    }
    Ok(Forest {
        trees,
        bootstraps,
        oob,
        response_levels: match data.y {
            Response::Categorical { levels, .. } => Some(*levels),
            Response::Quantitative(_) => None,
        },
    })
}

/// Mean (regression) or majority vote (classification, ties to the lowest
/// level) over all trees — or only the trees whose bootstrap excludes
/// `restrict_to_oob_of`. None when no tree is eligible.
pub fn predict_forest(
    forest: &Forest,
    row: &[Cell],
    restrict_to_oob_of: Option<usize>,
) -> Option<LeafValue> {
    let eligible = forest.trees.iter().enumerate().filter(|(t, _)| {
        restrict_to_oob_of.is_none_or(|r| !forest.bootstraps[*t].contains(&r))
    });
    match forest.response_levels {
        None => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (_, tree) in eligible {
                if let LeafValue::Number(v) = predict_tree(tree, row) {
                    sum += v;
                    n += 1;
                }
            }
            if n == 0 {
                None
            } else {
                Some(LeafValue::Number(sum / n as f64))
            }
        }
        Some(levels) => {
            let mut votes = alloc::vec![0usize; levels];
            let mut n = 0usize;
            for (_, tree) in eligible {
                if let LeafValue::Level(l) = predict_tree(tree, row) {
                    votes[*l] += 1;
                    n += 1;
                }
            }
            if n == 0 {
                None
            } else {
                Some(LeafValue::Level(argmax_lowest(&votes)))
            }
        }
    }
}

/// Out-of-bag truth/prediction pairs for one fitted forest: each training
/// row predicted only by trees that never saw it. Rows no tree excludes are
/// skipped.
pub fn oob_pairs(
    forest: &Forest,
    data: &TrainingData,
    rows: &[usize],
) -> Vec<(usize, LeafValue)> {
    rows.iter()
        .filter_map(|&r| {
            let row = &data.x[r * data.p..(r + 1) * data.p];
            predict_forest(forest, row, Some(r)).map(|pred| (r, pred))
        })
        .collect()
}

/// Fills every missing cell by iterated per-column forests: columns in
/// ascending-missingness order, loop ending on the first joint increase of
/// the stopping deltas (the previous iterate is returned) or at `max_iter`.
/// Diagnostics carry per-iteration deltas and the out-of-bag error estimate.
pub fn missforest_impute(
    table: &MixedTable,
    params: &ForestParams,
) -> Result<ImputationResult, ForestError> {
    let n = table.n_rows();
    let n_cols = table.n_cols();
    for c in 0..n_cols {
        if (0..n).all(|r| table.cell(r, c).is_missing()) {
            return Err(ForestError::AllMissingColumn(table.column(c).name.clone()));
        }
    }
    let root = SeededRng::new(params.seed).child("missforest");
    // mean/mode start
    let mut cells = table.cells_vec();
    for c in 0..n_cols {
        let fill = initial_fill(table, c);
        for r in 0..n {
            if table.cell(r, c).is_missing() {
                cells[r * n_cols + c] = fill;
            }
        }
    }
    let mut missing_cols: Vec<(usize, usize)> = (0..n_cols)
        .map(|c| {
            (
                c,
                (0..n).filter(|&r| table.cell(r, c).is_missing()).count(),
            )
        })
        .filter(|&(_, k)| k > 0)
        .collect();
    missing_cols.sort_by_key(|&(c, k)| (k, c));
    let quant_missing: Vec<(usize, usize)> = missing_positions(table, true);
    let cat_missing: Vec<(usize, usize)> = missing_positions(table, false);

    let mut deltas: Vec<StoppingDeltas> = Vec::new();
    let mut iterations = 0usize;
    let mut returned = cells.clone();
    if !missing_cols.is_empty() {
        for iter in 0..params.max_iter {
            let prev = cells.clone();
            for &(c, _) in &missing_cols {
                let (forest, data_x, kinds) = fit_column_forest(table, &cells, c, params, &root, iter)?;
                let width = kinds.len();
                for r in 0..n {
                    if table.cell(r, c).is_missing() {
                        let row = &data_x[r * width..(r + 1) * width];
                        let pred = predict_forest(&forest, row, None).expect("trees exist");
                        cells[r * n_cols + c] = match pred {
                            LeafValue::Number(v) => Cell::Number(v),
                            LeafValue::Level(l) => Cell::Level(l),
                        };
                    }
                }
            }
            let d = StoppingDeltas {
                quantitative: delta_quant(&prev, &cells, &quant_missing, n_cols),
                categorical: delta_cat(&prev, &cells, &cat_missing, n_cols),
            };
            let increased = deltas.last().is_some_and(|last| {
                let q_up = match (d.quantitative, last.quantitative) {
                    (Some(cur), Some(old)) => cur > old,
                    _ => true,
                };
                let c_up = match (d.categorical, last.categorical) {
                    (Some(cur), Some(old)) => cur > old,
                    _ => true,
                };
                q_up && c_up
            });
            deltas.push(d);
            iterations = iter + 1;
            if increased {
                // keep the previous iterate
                break;
            }
            returned = cells.clone();
        }
    }
    let out = table.with_cells(returned).expect("imputed cells stay valid");
    let oob = oob_estimate(table, &out, params, &root)?;
    let mut result = ImputationResult::new(out, "missforest");
    result.diagnostics = Diagnostics {
        iterations,
        deltas,
        fallbacks: Vec::new(),
        oob: Some(oob),
    };
    Ok(result)
}

fn missing_positions(table: &MixedTable, quantitative: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..table.n_rows() {
        for c in 0..table.n_cols() {
            if table.cell(r, c).is_missing()
                && table.column(c).kind.is_quantitative() == quantitative
            {
                out.push((r, c));
            }
        }
    }
    out
}

fn delta_quant(
    prev: &[Cell],
    cur: &[Cell],
    positions: &[(usize, usize)],
    n_cols: usize,
) -> Option<f64> {
    if positions.is_empty() {
        return None;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(r, c) in positions {
        let a = prev[r * n_cols + c].as_number().unwrap();
        let b = cur[r * n_cols + c].as_number().unwrap();
        num += (b - a) * (b - a);
        den += b * b;
    }
    Some(if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    })
}

fn delta_cat(
    prev: &[Cell],
    cur: &[Cell],
    positions: &[(usize, usize)],
    n_cols: usize,
) -> Option<f64> {
    if positions.is_empty() {
        return None;
    }
    let changed = positions
        .iter()
        .filter(|&&(r, c)| prev[r * n_cols + c] != cur[r * n_cols + c])
        .count();
    Some(changed as f64 / positions.len() as f64)
}

fn initial_fill(table: &MixedTable, c: usize) -> Cell {
    match &table.column(c).kind {
        ColumnKind::Quantitative => {
            let vals = table.observed_numbers(c);
            Cell::Number(vals.iter().sum::<f64>() / vals.len() as f64)
        }
        ColumnKind::Categorical { levels, .. } => {
            let mut counts = alloc::vec![0usize; levels.len()];
            for l in table.observed_levels(c) {
                counts[l] += 1;
            }
            Cell::Level(argmax_lowest(&counts))
        }
    }
}

fn predictor_kinds(table: &MixedTable, target: usize) -> Vec<PredictorKind> {
    (0..table.n_cols())
        .filter(|&c| c != target)
        .map(|c| match &table.column(c).kind {
            ColumnKind::Quantitative => PredictorKind::Quantitative,
            ColumnKind::Categorical { levels, .. } => PredictorKind::Categorical {
                levels: levels.len(),
            },
        })
        .collect()
}

fn predictor_rows(table: &MixedTable, cells: &[Cell], target: usize) -> Vec<Cell> {
    let n_cols = table.n_cols();
    let mut x = Vec::with_capacity(table.n_rows() * (n_cols - 1));
    for r in 0..table.n_rows() {
        for c in 0..n_cols {
            if c != target {
                x.push(cells[r * n_cols + c]);
            }
        }
    }
    x
}

fn response_for(table: &MixedTable, c: usize) -> Response {
    // indexed by row; only originally observed rows are ever read
    match &table.column(c).kind {
        ColumnKind::Quantitative => Response::Quantitative(
            (0..table.n_rows())
                .map(|r| table.cell(r, c).as_number().unwrap_or(0.0))
                .collect(),
        ),
        ColumnKind::Categorical { levels, .. } => Response::Categorical {
            values: (0..table.n_rows())
                .map(|r| table.cell(r, c).as_level().unwrap_or(0))
                .collect(),
            levels: levels.len(),
        },
    }
}

type FittedColumn = (Forest, Vec<Cell>, Vec<PredictorKind>);

fn fit_column_forest(
    table: &MixedTable,
    cells: &[Cell],
    c: usize,
    params: &ForestParams,
    root: &SeededRng,
    iter: usize,
) -> Result<FittedColumn, ForestError> {
    let kinds = predictor_kinds(table, c);
    let x = predictor_rows(table, cells, c);
    let y = response_for(table, c);
    let data = TrainingData {
        x: &x,
        p: kinds.len(),
        kinds: &kinds,
        y: &y,
    };
    let obs_rows: Vec<usize> = (0..table.n_rows())
        .filter(|&r| !table.cell(r, c).is_missing())
        .collect();
    let parent = root.child(&format!("{}/iter{}", table.column(c).name, iter));
    let forest = fit_forest(&data, &obs_rows, params, &parent, None)?;
    Ok((forest, x, kinds))
}

/// One forest per column on the completed table; OOB truth/prediction pairs
/// pooled into a global NRMSE (quantitative) and PFC (categorical), with
/// per-column components alongside.
fn oob_estimate(
    table: &MixedTable,
    completed: &MixedTable,
    params: &ForestParams,
    root: &SeededRng,
) -> Result<OobEstimate, ForestError> {
    let cells = completed.cells_vec();
    let mut pooled_truth: Vec<f64> = Vec::new();
    let mut pooled_sqdiff: Vec<f64> = Vec::new();
    let mut cat_wrong = 0usize;
    let mut cat_total = 0usize;
    let mut per_column = Vec::new();
    let mut variance_zero = false;
    for c in 0..table.n_cols() {
        let kinds = predictor_kinds(table, c);
        let x = predictor_rows(table, &cells, c);
        let y = response_for(table, c);
        let data = TrainingData {
            x: &x,
            p: kinds.len(),
            kinds: &kinds,
            y: &y,
        };
        let obs_rows: Vec<usize> = (0..table.n_rows())
            .filter(|&r| !table.cell(r, c).is_missing())
            .collect();
        let parent = root.child(&format!("oob/{}", table.column(c).name));
        let forest = fit_forest(&data, &obs_rows, params, &parent, None)?;
        let pairs = oob_pairs(&forest, &data, &obs_rows);
        match &y {
            Response::Quantitative(yv) => {
                let truths: Vec<f64> = pairs.iter().map(|&(r, _)| yv[r]).collect();
                let sqdiffs: Vec<f64> = pairs
                    .iter()
                    .map(|(r, p)| match p {
                        LeafValue::Number(v) => (yv[*r] - v) * (yv[*r] - v),
                        _ => unreachable!(),
                    })
                    .collect();
                if let Some(v) = pooled_nrmse(&truths, &sqdiffs) {
                    per_column.push((table.column(c).name.clone(), v));
                } else if !truths.is_empty() {
                    variance_zero = true;
                }
                pooled_truth.extend(truths);
                pooled_sqdiff.extend(sqdiffs);
            }
            Response::Categorical { values, .. } => {
                let wrong = pairs
                    .iter()
                    .filter(|(r, p)| match p {
                        LeafValue::Level(l) => *l != values[*r],
                        _ => unreachable!(),
                    })
                    .count();
                if !pairs.is_empty() {
                    per_column.push((
                        table.column(c).name.clone(),
                        wrong as f64 / pairs.len() as f64,
                    ));
                }
                cat_wrong += wrong;
                cat_total += pairs.len();
            }
        }
    }
    let nrmse = pooled_nrmse(&pooled_truth, &pooled_sqdiff);
    if nrmse.is_none() && !pooled_truth.is_empty() {
        variance_zero = true;
    }
    Ok(OobEstimate {
        nrmse,
        pfc: if cat_total == 0 {
            None
        } else {
            Some(cat_wrong as f64 / cat_total as f64)
        },
        per_column,
        variance_zero,
    })
}

fn pooled_nrmse(truths: &[f64], sqdiffs: &[f64]) -> Option<f64> {
    if truths.is_empty() {
        return None;
    }
    let n = truths.len() as f64;
    let mu = truths.iter().sum::<f64>() / n;
    let var = truths.iter().map(|t| (t - mu) * (t - mu)).sum::<f64>() / n;
    if var == 0.0 {
        return None;
    }
    Some(math::sqrt(sqdiffs.iter().sum::<f64>() / n / var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::ColumnMeta;
    use alloc::borrow::ToOwned;
    use alloc::vec;

    fn quant_data(xs: &[f64], ys: &[f64]) -> (Vec<Cell>, Vec<PredictorKind>, Response) {
        (
            xs.iter().map(|v| Cell::Number(*v)).collect(),
            vec![PredictorKind::Quantitative],
            Response::Quantitative(ys.to_vec()),
        )
    }

    #[test]
    fn pure_node_is_leaf() {
        let (x, kinds, y) = quant_data(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]);
        let data = TrainingData {
            x: &x,
            p: 1,
            kinds: &kinds,
            y: &y,
        };
        let mut rng = SeededRng::new(0).child("t").stream();
        let tree = fit_tree(&data, &[0, 1, 2], 1, 1, &mut rng).unwrap();
        assert!(matches!(
            tree,
            TreeNode::Leaf {
                value: LeafValue::Number(v),
                count: 3
            } if v == 5.0
        ));
    }

    #[test]
    fn step_function_splits_at_zero() {
        let xs = [-2.0, -1.0, 1.0, 2.0];
        let x: Vec<Cell> = xs.iter().map(|v| Cell::Number(*v)).collect();
        let kinds = vec![PredictorKind::Quantitative];
        let y = Response::Categorical {
            values: vec![0, 0, 1, 1],
            levels: 2,
        };
        let data = TrainingData {
            x: &x,
            p: 1,
            kinds: &kinds,
            y: &y,
        };
        let mut rng = SeededRng::new(1).child("t").stream();
        let tree = fit_tree(&data, &[0, 1, 2, 3], 1, 1, &mut rng).unwrap();
        match tree {
            TreeNode::Split {
                column,
                rule: SplitRule::Threshold(t),
                left,
                right,
            } => {
                assert_eq!(column, 0);
                assert_eq!(t, 0.0);
                assert!(matches!(
                    *left,
                    TreeNode::Leaf {
                        value: LeafValue::Level(0),
                        ..
                    }
                ));
                assert!(matches!(
                    *right,
                    TreeNode::Leaf {
                        value: LeafValue::Level(1),
                        ..
                    }
                ));
            }
            other => panic!("expected a threshold split, got {other:?}"),
        }
    }

    #[test]
    fn constant_predictor_yields_root_leaf() {
        let (x, kinds, y) = quant_data(&[3.0, 3.0, 3.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        let data = TrainingData {
            x: &x,
            p: 1,
            kinds: &kinds,
            y: &y,
        };
        let mut rng = SeededRng::new(2).child("t").stream();
        let tree = fit_tree(&data, &[0, 1, 2, 3], 1, 1, &mut rng).unwrap();
        assert!(matches!(
            tree,
            TreeNode::Leaf {
                value: LeafValue::Number(v),
                ..
            } if (v - 2.5).abs() < 1e-12
        ));
    }

    #[test]
    fn identity_bootstrap_equals_single_tree() {
        let (x, kinds, y) = quant_data(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let data = TrainingData {
            x: &x,
            p: 1,
            kinds: &kinds,
            y: &y,
        };
        let rows = [0, 1, 2, 3, 4];
        let params = ForestParams {
            ntree: 1,
            min_node_regression: 1,
            ..ForestParams::default()
        };
        let parent = SeededRng::new(3).child("f");
        let forest =
            fit_forest(&data, &rows, &params, &parent, Some(&[rows.to_vec()])).unwrap();
        let mut rng = parent.child("tree0").stream();
        let tree = fit_tree(&data, &rows, 1, 1, &mut rng).unwrap();
        assert_eq!(forest.trees[0], tree);
        assert!(forest.oob[0].is_empty());
    }

    #[test]
    fn oob_set_size_matches_binomial_expectation() {
        let n = 100usize;
        let (x, kinds, y) = {
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            quant_data(&xs.clone(), &xs)
        };
        let data = TrainingData {
            x: &x,
            p: 1,
            kinds: &kinds,
            y: &y,
        };
        let rows: Vec<usize> = (0..n).collect();
        let params = ForestParams {
            ntree: 1,
            ..ForestParams::default()
        };
        let mut total = 0usize;
        let seeds = 200;
        for s in 0..seeds {
            let parent = SeededRng::new(s).child("f");
            let forest = fit_forest(&data, &rows, &params, &parent, None).unwrap();
            total += forest.oob[0].len();
        }
        let mean = total as f64 / seeds as f64;
        let expected = n as f64 * (1.0 - 1.0 / n as f64).powi(n as i32);
        assert!(
            (mean - expected).abs() < 0.02 * n as f64,
            "mean OOB size {mean} vs expected {expected}"
        );
    }

    #[test]
    fn forest_vote_tie_goes_low() {
        let x = vec![Cell::Number(0.0)];
        let kinds = vec![PredictorKind::Quantitative];
        let y = Response::Categorical {
            values: vec![1],
            levels: 3,
        };
        let leaf = |l: usize| TreeNode::Leaf {
            value: LeafValue::Level(l),
            count: 1,
        };
        let forest = Forest {
            trees: vec![leaf(2), leaf(2), leaf(0), leaf(0)],
            bootstraps: vec![vec![0]; 4],
            oob: vec![vec![]; 4],
            response_levels: Some(3),
        };
        let data = TrainingData {
            x: &x,
            p: 1,
            kinds: &kinds,
            y: &y,
        };
        let _ = data;
        assert_eq!(
            predict_forest(&forest, &[Cell::Number(0.0)], None),
            Some(LeafValue::Level(0))
        );
    }

    #[test]
    fn oob_prediction_undefined_when_never_excluded() {
        let forest = Forest {
            trees: vec![TreeNode::Leaf {
                value: LeafValue::Number(1.0),
                count: 1,
            }],
            bootstraps: vec![vec![0, 0]],
            oob: vec![vec![]],
            response_levels: None,
        };
        assert_eq!(predict_forest(&forest, &[Cell::Number(0.0)], Some(0)), None);
    }

    fn linear_table(n: usize, missing: &[usize]) -> (MixedTable, MixedTable) {
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
        for i in 0..n {
            let x = i as f64 / 7.0;
            cells.push(Cell::Number(x));
            cells.push(Cell::Number(3.0 * x));
        }
        let complete = MixedTable::new(cols, n, cells.clone()).unwrap();
        for &r in missing {
            cells[r * 2 + 1] = Cell::Missing;
        }
        let holed = complete.with_cells(cells).unwrap();
        (complete, holed)
    }

    #[test]
    fn imputations_stay_in_observed_range() {
        let (_, holed) = linear_table(60, &[0, 7, 13, 29, 44, 59]);
        let params = ForestParams {
            ntree: 20,
            seed: 5,
            ..ForestParams::default()
        };
        let out = missforest_impute(&holed, &params).unwrap();
        let observed: Vec<f64> = holed.observed_numbers(1);
        let lo = observed.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = observed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for r in [0usize, 7, 13, 29, 44, 59] {
            let v = out.table.cell(r, 1).as_number().unwrap();
            assert!((lo..=hi).contains(&v));
        }
        assert!(!out.table.has_missing());
    }

    #[test]
    fn deterministic_given_seed() {
        let (_, holed) = linear_table(40, &[3, 11, 25]);
        let params = ForestParams {
            ntree: 15,
            seed: 9,
            ..ForestParams::default()
        };
        let a = missforest_impute(&holed, &params).unwrap();
        let b = missforest_impute(&holed, &params).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.diagnostics.oob, b.diagnostics.oob);
    }

    #[test]
    fn no_missing_returns_input_with_oob() {
        let (complete, _) = linear_table(30, &[]);
        let params = ForestParams {
            ntree: 10,
            seed: 2,
            ..ForestParams::default()
        };
        let out = missforest_impute(&complete, &params).unwrap();
        assert_eq!(out.table, complete);
        assert_eq!(out.diagnostics.iterations, 0);
        assert!(out.diagnostics.oob.as_ref().unwrap().nrmse.is_some());
    }

    #[test]
    fn all_missing_column_rejected() {
        let cols = vec![
            ColumnMeta {
                name: "a".to_owned(),
                kind: ColumnKind::Quantitative,
            },
            ColumnMeta {
                name: "b".to_owned(),
                kind: ColumnKind::Quantitative,
            },
        ];
        let t = MixedTable::new(
            cols,
            2,
            vec![
                Cell::Number(1.0),
                Cell::Missing,
                Cell::Number(2.0),
                Cell::Missing,
            ],
        )
        .unwrap();
        assert!(matches!(
            missforest_impute(&t, &ForestParams::default()),
            Err(ForestError::AllMissingColumn(_))
        ));
    }

    #[test]
    fn beats_mean_imputation_on_linear_data() {
        use crate::metrics::nrmse;
        use crate::table::MissingMask;
        let mut wins = 0;
        let trials = 20;
        for seed in 0..trials {
            let (complete, holed) = linear_table(100, &[1, 12, 23, 34, 45, 56, 67, 78, 89, 99]);
            let mask = MissingMask::from_table(&holed);
            let params = ForestParams {
                ntree: 30,
                seed,
                ..ForestParams::default()
            };
            let out = missforest_impute(&holed, &params).unwrap();
            let forest_err = nrmse(&complete, &out.table, &mask).unwrap().unwrap();
            let obs = holed.observed_numbers(1);
            let mean = obs.iter().sum::<f64>() / obs.len() as f64;
            let mut mean_cells = holed.cells_vec();
            for (r, c, _) in mask.iter() {
                mean_cells[r * 2 + c] = Cell::Number(mean);
            }
            let mean_imp = complete.with_cells(mean_cells).unwrap();
            let mean_err = nrmse(&complete, &mean_imp, &mask).unwrap().unwrap();
            if forest_err < mean_err {
                wins += 1;
            }
        }
        assert!(wins >= 18, "forest beat the mean baseline in {wins}/20 trials");
    }

    #[test]
    fn separable_classification_oob_small() {
        let cols = vec![
            ColumnMeta {
                name: "x".to_owned(),
                kind: ColumnKind::Quantitative,
            },
            ColumnMeta {
                name: "c".to_owned(),
                kind: ColumnKind::Categorical {
                    levels: vec!["lo".to_owned(), "hi".to_owned()],
                    ordered: false,
                },
            },
        ];
        let n = 200;
        let mut cells = Vec::new();
        for i in 0..n {
            let x = i as f64;
            cells.push(Cell::Number(x));
            cells.push(Cell::Level(usize::from(x >= 100.0)));
        }
        let t = MixedTable::new(cols, n, cells).unwrap();
        for seed in 0..5 {
            let params = ForestParams {
                ntree: 50,
                seed,
                ..ForestParams::default()
            };
            let out = missforest_impute(&t, &params).unwrap();
            let oob = out.diagnostics.oob.unwrap();
            assert!(oob.pfc.unwrap() <= 0.05, "pfc {:?}", oob.pfc);
        }
    }
}
