//! Chained-equations multiple imputation: per-column conditional models
//! (PMM, logistic, polytomous, proportional odds), m parallel chains, and
//! per-cell pooling to a single table.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg;
use crate::math;
use crate::result::{Diagnostics, ImputationResult};
use crate::rng::SeededRng;
use crate::table::{Cell, ColumnKind, MixedTable};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum MiceError {
    #[error("column `{column}` has {observed} observed values, needs {needed}")]
    TooFewObserved {
        column: String,
        observed: usize,
        needed: usize,
    },
    #[error("singular system fitting column `{column}` (chain {chain}, sweep {sweep})")]
    Singular {
        chain: usize,
        sweep: usize,
        column: String,
    },
    #[error("tables have different schemas")]
    SchemaMismatch,
    #[error("pool needs at least one table")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiceParams {
    pub m: usize,
    pub maxit: usize,
    pub pmm_donors: usize,
    pub ridge: f64,
    pub drop_collinear: bool,
    pub seed: u64,
}

impl Default for MiceParams {
    fn default() -> Self {
        MiceParams {
            m: 5,
            maxit: 5,
            pmm_donors: 5,
            ridge: 1e-5,
            drop_collinear: false,
            seed: 0,
        }
    }
}

/// Row-major predictor encoding with a leading intercept column:
/// quantitative columns as-is, categorical one-hot dropping the first level.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: Vec<f64>,
    pub n: usize,
    pub p: usize,
}

impl DesignMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.x[r * self.p..(r + 1) * self.p]
    }
}

/// Encodes every row of `cells` (which must be complete) excluding `target`.
pub fn design_matrix(table: &MixedTable, cells: &[Cell], target: usize) -> DesignMatrix {
    let n = table.n_rows();
    let n_cols = table.n_cols();
    let mut width = 1;
    for c in 0..n_cols {
        if c == target {
            continue;
        }
        width += match &table.column(c).kind {
            ColumnKind::Quantitative => 1,
            ColumnKind::Categorical { levels, .. } => levels.len() - 1,
        };
    }
    let mut x = Vec::with_capacity(n * width);
    for r in 0..n {
        x.push(1.0);
        for c in 0..n_cols {
            if c == target {
                continue;
            }
            match (&table.column(c).kind, &cells[r * n_cols + c]) {
                (ColumnKind::Quantitative, Cell::Number(v)) => x.push(*v),
                (ColumnKind::Categorical { levels, .. }, Cell::Level(l)) => {
                    for k in 1..levels.len() {
                        x.push(if *l == k { 1.0 } else { 0.0 });
                    }
                }
                _ => panic!("design matrix requires complete cells"),
            }
        }
    }
    DesignMatrix { x, n, p: width }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ridge least squares via the normal equations; the intercept (coefficient
/// 0) is unpenalized.
pub fn fit_linear_ridge(
    x: &DesignMatrix,
    rows: &[usize],
    y: &[f64],
    ridge: f64,
) -> Result<Vec<f64>, linalg::SingularSystem> {
    let p = x.p;
    let mut a = alloc::vec![0.0f64; p * p];
    let mut b = alloc::vec![0.0f64; p];
    for (i, &r) in rows.iter().enumerate() {
        let xr = x.row(r);
        for j in 0..p {
            b[j] += xr[j] * y[i];
            for k in 0..p {
                a[j * p + k] += xr[j] * xr[k];
            }
        }
    }
    for j in 1..p {
        a[j * p + j] += ridge;
    }
    linalg::solve(a, b)
}

fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-35.0, 35.0);
    1.0 / (1.0 + math::exp(-z))
}

/// A fitted binary model: full coefficients, or a smoothed constant
/// probability when only one class was observed or the fit degenerated.
#[derive(Debug, Clone, PartialEq)]
pub enum LogisticFit {
    Coefficients(Vec<f64>),
    Constant(f64),
}

impl LogisticFit {
    pub fn probability(&self, xr: &[f64]) -> f64 {
        match self {
            LogisticFit::Coefficients(beta) => sigmoid(dot(beta, xr)),
            LogisticFit::Constant(p) => *p,
        }
    }
}

/// Penalized logistic regression by iteratively reweighted least squares
/// (at most 25 steps, gradient-norm tolerance 1e-8). One-class data yields
/// the smoothed constant model (n1 + 0.5) / (n + 1).
pub fn fit_logistic(x: &DesignMatrix, rows: &[usize], y: &[f64], ridge: f64) -> LogisticFit {
    let n = rows.len();
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return LogisticFit::Constant((ones as f64 + 0.5) / (n as f64 + 1.0));
    }
    let p = x.p;
    let mut beta = alloc::vec![0.0f64; p];
    for _ in 0..25 {
        let mut grad = alloc::vec![0.0f64; p];
        let mut hess = alloc::vec![0.0f64; p * p];
        for (i, &r) in rows.iter().enumerate() {
            let xr = x.row(r);
            let mu = sigmoid(dot(&beta, xr));
            let w = (mu * (1.0 - mu)).max(1e-10);
            for j in 0..p {
                grad[j] += xr[j] * (y[i] - mu);
                for k in 0..p {
                    hess[j * p + k] += w * xr[j] * xr[k];
                }
            }
        }
        for j in 1..p {
            grad[j] -= ridge * beta[j];
            hess[j * p + j] += ridge;
        }
        let gnorm = math::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        if gnorm < 1e-8 {
            break;
        }
        let step = match linalg::solve(hess, grad) {
            Ok(s) => s,
            Err(_) => return LogisticFit::Constant((ones as f64 + 0.5) / (n as f64 + 1.0)),
        };
        if step.iter().any(|v| !v.is_finite()) {
            return LogisticFit::Constant((ones as f64 + 0.5) / (n as f64 + 1.0));
        }
        for j in 0..p {
            beta[j] += step[j];
        }
    }
    LogisticFit::Coefficients(beta)
}

/// Multinomial softmax model with the first level as reference, or a
/// smoothed empirical distribution when the fit degenerates.
#[derive(Debug, Clone, PartialEq)]
pub enum PolytomousFit {
    /// One coefficient vector per non-reference level.
    Coefficients { k: usize, beta: Vec<Vec<f64>> },
    Constant(Vec<f64>),
}

impl PolytomousFit {
    pub fn probabilities(&self, xr: &[f64]) -> Vec<f64> {
        match self {
            PolytomousFit::Constant(p) => p.clone(),
            PolytomousFit::Coefficients { k, beta } => {
                let mut scores = alloc::vec![0.0f64];
                for b in beta {
                    scores.push(dot(b, xr).clamp(-35.0, 35.0));
                }
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| math::exp(s - max)).collect();
                let z: f64 = exps.iter().sum();
                debug_assert_eq!(scores.len(), *k);
                exps.iter().map(|e| e / z).collect()
            }
        }
    }
}

fn smoothed_frequencies(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let k = counts.len();
    let denom = n as f64 + 0.5 * k as f64;
    counts.iter().map(|&c| (c as f64 + 0.5) / denom).collect()
}

/// Ridge-penalized softmax regression fitted by Newton steps over the full
/// (k-1)·p parameter block; falls back to smoothed observed frequencies if
/// the Hessian is singular or the iteration diverges.
pub fn fit_polytomous(
    x: &DesignMatrix,
    rows: &[usize],
    y: &[usize],
    n_levels: usize,
    ridge: f64,
) -> PolytomousFit {
    let p = x.p;
    let mut counts = alloc::vec![0usize; n_levels];
    for &l in y {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return PolytomousFit::Constant(smoothed_frequencies(&counts));
    }
    if n_levels == 2 {
        let y01: Vec<f64> = y.iter().map(|&l| l as f64).collect();
        return match fit_logistic(x, rows, &y01, ridge) {
            LogisticFit::Coefficients(beta) => PolytomousFit::Coefficients {
                k: 2,
                beta: alloc::vec![beta],
            },
            LogisticFit::Constant(q) => PolytomousFit::Constant(alloc::vec![1.0 - q, q]),
        };
    }
    let km1 = n_levels - 1;
    let dim = km1 * p;
    let mut theta = alloc::vec![0.0f64; dim];
    for _ in 0..25 {
        let mut grad = alloc::vec![0.0f64; dim];
        let mut hess = alloc::vec![0.0f64; dim * dim];
        for (i, &r) in rows.iter().enumerate() {
            let xr = x.row(r);
            let mut scores = alloc::vec![0.0f64];
            for a in 0..km1 {
                scores.push(dot(&theta[a * p..(a + 1) * p], xr).clamp(-35.0, 35.0));
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| math::exp(s - max)).collect();
            let z: f64 = exps.iter().sum();
            let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
            for a in 0..km1 {
                let ya = if y[i] == a + 1 { 1.0 } else { 0.0 };
                let resid = ya - probs[a + 1];
                for j in 0..p {
                    grad[a * p + j] += xr[j] * resid;
                }
                for b in 0..km1 {
                    let w = probs[a + 1] * (if a == b { 1.0 } else { 0.0 } - probs[b + 1]);
                    for j in 0..p {
                        for l in 0..p {
                            hess[(a * p + j) * dim + (b * p + l)] -= w * xr[j] * xr[l];
                        }
                    }
                }
            }
        }
        // Newton on the negative log-likelihood: flip signs, add the ridge.
        for v in hess.iter_mut() {
            *v = -*v;
        }
        for a in 0..km1 {
            for j in 1..p {
                grad[a * p + j] -= ridge * theta[a * p + j];
                hess[(a * p + j) * dim + (a * p + j)] += ridge;
            }
        }
        let gnorm = math::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        if gnorm < 1e-8 {
            break;
        }
        let step = match linalg::solve(hess, grad) {
            Ok(s) => s,
            Err(_) => return PolytomousFit::Constant(smoothed_frequencies(&counts)),
        };
        if step.iter().any(|v| !v.is_finite() || math::abs(*v) > 1e6) {
            return PolytomousFit::Constant(smoothed_frequencies(&counts));
        }
        for j in 0..dim {
            theta[j] += step[j];
        }
    }
    let beta = (0..km1).map(|a| theta[a * p..(a + 1) * p].to_vec()).collect();
    PolytomousFit::Coefficients { k: n_levels, beta }
}

/// Non-convergence marker for the cumulative-logit fit; callers fall back
/// to the polytomous model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DidNotConverge;

/// Cumulative-logit model with shared slopes and strictly increasing
/// thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalOddsFit {
    pub thresholds: Vec<f64>,
    /// Slopes over the design matrix minus its intercept column.
    pub slopes: Vec<f64>,
}

impl ProportionalOddsFit {
    pub fn probabilities(&self, xr: &[f64]) -> Vec<f64> {
        let eta = dot(&self.slopes, &xr[1..]);
        let k = self.thresholds.len() + 1;
        let mut probs = Vec::with_capacity(k);
        let mut prev = 0.0;
        for t in &self.thresholds {
            let cum = sigmoid(t - eta);
            probs.push((cum - prev).max(0.0));
            prev = cum;
        }
        probs.push((1.0 - prev).max(0.0));
        let z: f64 = probs.iter().sum();
        probs.iter().map(|p| p / z).collect()
    }
}

pub fn fit_proportional_odds(
    x: &DesignMatrix,
    rows: &[usize],
    y: &[usize],
    n_levels: usize,
    ridge: f64,
) -> Result<ProportionalOddsFit, DidNotConverge> {
    let km1 = n_levels - 1;
    let slopes_n = x.p - 1;
    let dim = km1 + slopes_n;
    let n = rows.len();
    let mut counts = alloc::vec![0usize; n_levels];
    for &l in y {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(DidNotConverge);
    }
    // thresholds start at the empirical cumulative logits
    let mut theta = alloc::vec![0.0f64; dim];
    let mut cum = 0.0;
    for k in 0..km1 {
        cum += counts[k] as f64 / n as f64;
        let c = cum.clamp(1e-6, 1.0 - 1e-6);
        theta[k] = math::ln(c / (1.0 - c));
    }
    let grad_at = |theta: &[f64]| -> Vec<f64> {
        let mut grad = alloc::vec![0.0f64; dim];
        for (i, &r) in rows.iter().enumerate() {
            let xr = x.row(r);
            let eta = dot(&theta[km1..], &xr[1..]);
            let k = y[i];
            let upper = if k < km1 { sigmoid(theta[k] - eta) } else { 1.0 };
            let lower = if k > 0 { sigmoid(theta[k - 1] - eta) } else { 0.0 };
            let pk = (upper - lower).max(1e-10);
            let gu = if k < km1 { upper * (1.0 - upper) } else { 0.0 };
            let gl = if k > 0 { lower * (1.0 - lower) } else { 0.0 };
            if k < km1 {
                grad[k] += gu / pk;
            }
            if k > 0 {
                grad[k - 1] -= gl / pk;
            }
            let slope_factor = -(gu - gl) / pk;
            for (j, xi) in xr[1..].iter().enumerate() {
                grad[km1 + j] += slope_factor * xi;
            }
        }
        for j in 0..dim {
            grad[j] -= ridge * theta[j];
        }
        grad
    };
    let mut converged = false;
    for _ in 0..50 {
        let grad = grad_at(&theta);
        let gnorm = math::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        if gnorm < 1e-8 {
            converged = true;
            break;
        }
        // Newton step with a central-difference Hessian of the gradient.
        let h = 1e-5;
        let mut hess = alloc::vec![0.0f64; dim * dim];
        for j in 0..dim {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let gp = grad_at(&tp);
            let gm = grad_at(&tm);
            for i in 0..dim {
                // negative log-likelihood curvature
                hess[i * dim + j] = -(gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let step = match linalg::solve(hess, grad) {
            Ok(s) => s,
            Err(_) => return Err(DidNotConverge),
        };
        if step.iter().any(|v| !v.is_finite() || math::abs(*v) > 1e4) {
            return Err(DidNotConverge);
        }
        for j in 0..dim {
            theta[j] += step[j];
        }
    }
    if !converged {
        let grad = grad_at(&theta);
        let gnorm = math::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        if gnorm > 1e-4 {
            return Err(DidNotConverge);
        }
    }
    let thresholds = theta[..km1].to_vec();
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DidNotConverge);
    }
    Ok(ProportionalOddsFit {
        thresholds,
        slopes: theta[km1..].to_vec(),
    })
}

/// Predictive mean matching for one quantitative column. `obs_rows` and
/// `mis_rows` index into the design matrix; `y_obs` aligns with `obs_rows`.
/// Each missing row copies the observed value of one of the `donors` rows
/// whose linear prediction is closest (ties to the lower row index).
pub fn pmm_impute_column<R: Rng>(
    x: &DesignMatrix,
    obs_rows: &[usize],
    y_obs: &[f64],
    mis_rows: &[usize],
    donors: usize,
    ridge: f64,
    rng: &mut R,
) -> Result<Vec<f64>, linalg::SingularSystem> {
    let beta = fit_linear_ridge(x, obs_rows, y_obs, ridge)?;
    let yhat_obs: Vec<f64> = obs_rows.iter().map(|&r| dot(&beta, x.row(r))).collect();
    let k = donors.min(obs_rows.len());
    let mut out = Vec::with_capacity(mis_rows.len());
    for &m in mis_rows {
        let target = dot(&beta, x.row(m));
        let mut order: Vec<usize> = (0..obs_rows.len()).collect();
        order.sort_by(|&a, &b| {
            math::cmp_f64(
                math::abs(yhat_obs[a] - target),
                math::abs(yhat_obs[b] - target),
            )
            .then(obs_rows[a].cmp(&obs_rows[b]))
        });
        let pick = order[rng.random_range(0..k)];
        out.push(y_obs[pick]);
    }
    Ok(out)
}

fn draw_level<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (l, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return l;
        }
    }
    probs.len() - 1
}

pub struct MiceOutput {
    pub chains: Vec<MixedTable>,
    pub pooled: ImputationResult,
}

/// Runs `m` independent chained-equations chains and pools them. Columns are
/// visited in schema order each sweep; models are refitted on the originally
/// observed rows with current imputations as predictors.
pub fn mice_impute(table: &MixedTable, params: &MiceParams) -> Result<MiceOutput, MiceError> {
    assert!(params.m >= 1 && params.maxit >= 1 && params.pmm_donors >= 1);
    assert!(params.ridge >= 0.0);
    let n = table.n_rows();
    let n_cols = table.n_cols();
    for c in 0..n_cols {
        let observed = (0..n).filter(|&r| !table.cell(r, c).is_missing()).count();
        if observed == n {
            continue;
        }
        let needed = match &table.column(c).kind {
            ColumnKind::Quantitative => params.pmm_donors.max(2),
            ColumnKind::Categorical { .. } => 2,
        };
        if observed < needed {
            return Err(MiceError::TooFewObserved {
                column: table.column(c).name.clone(),
                observed,
                needed,
            });
        }
    }
    let missing_cols: Vec<usize> = (0..n_cols)
        .filter(|&c| (0..n).any(|r| table.cell(r, c).is_missing()))
        .collect();
    let root = SeededRng::new(params.seed).child("mice");
    let mut chains = Vec::with_capacity(params.m);
    let mut fallbacks: Vec<(usize, usize, String, String)> = Vec::new();
    for chain in 0..params.m {
        let mut rng = root.child(&format!("chain{chain}")).stream();
        let mut cells = table.cells_vec();
        // start from random draws of each column's observed values
        for &c in &missing_cols {
            let obs: Vec<Cell> = (0..n)
                .map(|r| *table.cell(r, c))
                .filter(|cell| !cell.is_missing())
                .collect();
            for r in 0..n {
                if table.cell(r, c).is_missing() {
                    cells[r * n_cols + c] = obs[rng.random_range(0..obs.len())];
                }
            }
        }
        for sweep in 0..params.maxit {
            for &c in &missing_cols {
                let x = design_matrix(table, &cells, c);
                let obs_rows: Vec<usize> =
                    (0..n).filter(|&r| !table.cell(r, c).is_missing()).collect();
                let mis_rows: Vec<usize> =
                    (0..n).filter(|&r| table.cell(r, c).is_missing()).collect();
                match &table.column(c).kind {
                    ColumnKind::Quantitative => {
                        let y_obs: Vec<f64> = obs_rows
                            .iter()
                            .map(|&r| table.cell(r, c).as_number().unwrap())
                            .collect();
                        let vals = pmm_impute_column(
                            &x,
                            &obs_rows,
                            &y_obs,
                            &mis_rows,
                            params.pmm_donors,
                            params.ridge,
                            &mut rng,
                        )
                        .map_err(|_| MiceError::Singular {
                            chain,
                            sweep,
                            column: table.column(c).name.clone(),
                        })?;
                        for (&r, v) in mis_rows.iter().zip(vals) {
                            cells[r * n_cols + c] = Cell::Number(v);
                        }
                    }
                    ColumnKind::Categorical { levels, ordered } => {
                        let y: Vec<usize> = obs_rows
                            .iter()
                            .map(|&r| table.cell(r, c).as_level().unwrap())
                            .collect();
                        let fit = if *ordered && levels.len() > 2 {
                            match fit_proportional_odds(&x, &obs_rows, &y, levels.len(), params.ridge)
                            {
                                Ok(po) => {
                                    for &r in &mis_rows {
                                        let probs = po.probabilities(x.row(r));
                                        cells[r * n_cols + c] =
                                            Cell::Level(draw_level(&probs, &mut rng));
                                    }
                                    continue;
                                }
                                Err(DidNotConverge) => {
                                    fallbacks.push((
                                        chain,
                                        sweep,
                                        table.column(c).name.clone(),
                                        String::from("proportional-odds fit failed; polytomous"),
                                    ));
                                    fit_polytomous(&x, &obs_rows, &y, levels.len(), params.ridge)
                                }
                            }
                        } else {
                            fit_polytomous(&x, &obs_rows, &y, levels.len(), params.ridge)
                        };
                        if let PolytomousFit::Constant(_) = &fit {
                            fallbacks.push((
                                chain,
                                sweep,
                                table.column(c).name.clone(),
                                String::from("degenerate fit; smoothed frequency draws"),
                            ));
                        }
                        for &r in &mis_rows {
                            let probs = fit.probabilities(x.row(r));
                            cells[r * n_cols + c] = Cell::Level(draw_level(&probs, &mut rng));
                        }
                    }
                }
            }
        }
        chains.push(table.with_cells(cells).expect("chain cells stay valid"));
    }
    let pooled_table = pool(&chains)?;
    let mut result = ImputationResult::new(pooled_table, "mice");
    result.diagnostics = Diagnostics {
        iterations: params.maxit,
        deltas: Vec::new(),
        fallbacks,
        oob: None,
    };
    Ok(MiceOutput {
        chains,
        pooled: result,
    })
}

/// Per-cell aggregation of equally-shaped tables: quantitative cells average
/// across chains, categorical cells take the mode (ties go to the first
/// table's value).
pub fn pool(tables: &[MixedTable]) -> Result<MixedTable, MiceError> {
    let first = tables.first().ok_or(MiceError::Empty)?;
    for t in &tables[1..] {
        if t.columns() != first.columns() || t.n_rows() != first.n_rows() {
            return Err(MiceError::SchemaMismatch);
        }
    }
    let n = first.n_rows();
    let n_cols = first.n_cols();
    let mut cells = Vec::with_capacity(n * n_cols);
    for r in 0..n {
        for c in 0..n_cols {
            let cell = match &first.column(c).kind {
                ColumnKind::Quantitative => {
                    let mut sum = 0.0;
                    for t in tables {
                        sum += t
                            .cell(r, c)
                            .as_number()
                            .ok_or(MiceError::SchemaMismatch)?;
                    }
                    Cell::Number(sum / tables.len() as f64)
                }
                ColumnKind::Categorical { levels, .. } => {
                    let mut votes = alloc::vec![0usize; levels.len()];
                    for t in tables {
                        votes[t.cell(r, c).as_level().ok_or(MiceError::SchemaMismatch)?] += 1;
                    }
                    let top = *votes.iter().max().unwrap();
                    if votes.iter().filter(|&&v| v == top).count() > 1 {
                        *first.cell(r, c)
                    } else {
                        Cell::Level(votes.iter().position(|&v| v == top).unwrap())
                    }
                }
            };
            cells.push(cell);
        }
    }
    first.with_cells(cells).map_err(|_| MiceError::SchemaMismatch)
}
