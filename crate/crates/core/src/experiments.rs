//! Simulation harnesses for the bias-variance trade-off along a ridge path
//! and for double descent of minimum-norm additive spline fits.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cv::{loo_ridge_with, RidgeOperator};
use crate::dataset::Dataset;
use crate::decomp::svd_thin;
use crate::error::{Result, RidgeError};
use crate::io::{fmt_num, Table};
use crate::ridge::{james_stein, residual_variance, ridge_fit};
use crate::rng::{normal_matrix, normal_vec, stream_rng, streams};
use crate::spline::AdditiveBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    BiasVariance,
    DoubleDescent,
}

/// What an experiment sweeps over.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentGrid {
    /// `count` log-spaced values over `[1e-4, 1e4] · d₁²`.
    ScaledLog {
        count: usize,
    },
    Lambdas(Vec<f64>),
    /// Spline dimensions per variable.
    Dimensions(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    /// Number of features; fixed at 9 for double descent.
    pub p: usize,
    pub snr: f64,
    pub seed: u64,
    pub grid: ExperimentGrid,
    pub test_size: usize,
    /// Draws for the Monte-Carlo signal variance in double descent.
    pub variance_draws: usize,
}

impl ExperimentConfig {
    pub fn bias_variance(seed: u64) -> Self {
        Self {
            kind: ExperimentKind::BiasVariance,
            n: 100,
            p: 54,
            snr: 3.3,
            seed,
            grid: ExperimentGrid::ScaledLog { count: 50 },
            test_size: 0,
            variance_draws: 0,
        }
    }

    pub fn double_descent(seed: u64) -> Self {
        Self {
            kind: ExperimentKind::DoubleDescent,
            n: 100,
            p: 9,
            snr: 3.0,
            seed,
            grid: ExperimentGrid::Dimensions((1..=30).collect()),
            test_size: 10_000,
            variance_draws: 1_000_000,
        }
    }

    fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if self.kind != kind {
            return Err(RidgeError::invalid("configuration is for a different experiment"));
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(RidgeError::domain("SNR must be positive"));
        }
        if self.n < 2 {
            return Err(RidgeError::invalid("need at least two training rows"));
        }
        let empty = match &self.grid {
            ExperimentGrid::ScaledLog { count } => *count == 0,
            ExperimentGrid::Lambdas(l) => l.is_empty(),
            ExperimentGrid::Dimensions(d) => d.is_empty(),
        };
        if empty {
            return Err(RidgeError::invalid("experiment grid is empty"));
        }
        Ok(())
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || !hi.is_finite() || count == 0 {
        return Err(RidgeError::domain("log grid needs 0 < lo <= hi and a positive count"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
    g[0] = lo;
    g[count - 1] = hi;
    Ok(g)
}

fn penalty_grid(grid: &ExperimentGrid, d1: f64) -> Result<Vec<f64>> {
    match grid {
        ExperimentGrid::ScaledLog { count } => {
            let s = (d1 * d1).max(f64::MIN_POSITIVE);
            log_grid(1e-4 * s, 1e4 * s, *count)
        }
        ExperimentGrid::Lambdas(l) => {
            if l.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(RidgeError::domain("penalties must be positive"));
            }
            Ok(l.clone())
        }
        ExperimentGrid::Dimensions(_) => Err(RidgeError::invalid("expected a penalty grid")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasVarianceRow {
    pub lambda: f64,
    pub coef_norm: f64,
    /// `σ² + E_x(f̂(x) − f(x))²` over fresh `x ~ N(0, I)`.
    pub epe: f64,
    /// `E_x(f̂(x) − f(x))²`.
    pub mse: f64,
    pub loo_cv: f64,
    pub df: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasVarianceResult {
    pub sigma2: f64,
    pub rows: Vec<BiasVarianceRow>,
    pub james_stein: BiasVarianceRow,
    /// The noise estimate `RSS/(n − p − 1)` plugged into James-Stein.
    pub sigma2_hat: f64,
}

impl BiasVarianceResult {
    fn argmin(&self, key: impl Fn(&BiasVarianceRow) -> f64) -> usize {
        let mut best = 0;
        for (i, r) in self.rows.iter().enumerate() {
            if key(r) < key(&self.rows[best]) {
                best = i;
            }
        }
        best
    }

    /// Grid index with the smallest exact EPE.
    pub fn oracle_index(&self) -> usize {
        self.argmin(|r| r.epe)
    }

    /// Grid index with the smallest LOO score.
    pub fn loo_index(&self) -> usize {
        self.argmin(|r| r.loo_cv)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["kind", "lambda", "coef_norm", "epe", "mse", "loo_cv", "df"]);
        let row = |kind: &str, r: &BiasVarianceRow| {
            vec![
                kind.to_string(),
                fmt_num(r.lambda),
                fmt_num(r.coef_norm),
                fmt_num(r.epe),
                fmt_num(r.mse),
                fmt_num(r.loo_cv),
                fmt_num(r.df),
            ]
        };
        for r in &self.rows {
            t.push(row("ridge", r));
        }
        t.push(row("james_stein", &self.james_stein));
        t
    }
}

/// Linear truth `y = xᵀβ + ε` with `β ~ N(0, I)` drawn once and `σ²` set so
/// that `‖β‖²/σ² = SNR`. The fit is centered with an intercept; EPE is exact
/// because `x ~ N(0, I)` makes `E_x(f̂ − f)² = b₀² + ‖β̂ − β‖²`.
pub fn run_bias_variance(config: &ExperimentConfig) -> Result<BiasVarianceResult> {
    config.validate(ExperimentKind::BiasVariance)?;
    let (n, p, seed) = (config.n, config.p, config.seed);
    let x = normal_matrix::<f64>(seed, streams::DESIGN, n, p);
    let beta = normal_vec::<f64>(seed, streams::TRUTH, p);
    let sigma2 = beta.norm_squared() / config.snr;
    let y = &x * &beta + normal_vec::<f64>(seed, streams::NOISE, n) * sigma2.sqrt();
    let data = Dataset::centered(x, y)?;
    let op = RidgeOperator::new(&data.x)?;
    let d1 = op.factors.d.iter().next().copied().unwrap_or(0.0);
    let lambdas = penalty_grid(&config.grid, d1)?;

    let score = |coef: &DVector<f64>, lambda: f64, loo: f64, df: f64| {
        let b0 = data.intercept_for(coef).unwrap_or(0.0);
        let mse = b0 * b0 + (coef - &beta).norm_squared();
        BiasVarianceRow { lambda, coef_norm: coef.norm(), epe: sigma2 + mse, mse, loo_cv: loo, df }
    };
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let fit = ridge_fit(&data, lambda)?;
            let loo = loo_ridge_with(&op, &data, lambda)?.mean();
            Ok(score(&fit.coefficients, lambda, loo, op.trace(lambda)))
        })
        .collect::<Result<Vec<_>>>()?;

    let sigma2_hat = residual_variance(&data)?;
    let js = james_stein(&data, sigma2_hat)?;
    let js_row = score(&js, f64::NAN, f64::NAN, f64::NAN);
    Ok(BiasVarianceResult { sigma2, rows, james_stein: js_row, sigma2_hat })
}

/// Nonlinear, nonadditive truth on nine inputs.
pub fn double_descent_truth(x: &[f64]) -> f64 {
    x[0] * x[1] + (2.0 * x[2]).sin() + x[3] * x[3] - x[4] * x[5] + 0.5 * x[6] * x[7] * x[8]
}

/// Monte-Carlo variance of [`double_descent_truth`] under `x ~ N(0, I₉)`.
pub fn truth_variance(draws: usize, seed: u64) -> f64 {
    const CHUNK: usize = 1 << 15;
    let chunks = draws.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, streams::AUX + c as u64);
            let mut x = [0.0; 9];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in c * CHUNK..((c + 1) * CHUNK).min(draws) {
                for v in &mut x {
                    *v = rng.sample(StandardNormal);
                }
                let f = double_descent_truth(&x);
                s1 += f;
                s2 += f * f;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = draws as f64;
    (s2 - s1 * s1 / m) / (m - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleDescentRow {
    pub d: usize,
    /// Model dimension `9d + 1`, intercept included.
    pub dimension: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub ridge_test_mse: f64,
    pub ridge_lambda: f64,
    pub theta_norm: f64,
    /// Smallest nonzero singular value of `[1 | H]`.
    pub min_singular: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleDescentResult {
    pub sigma2: f64,
    pub signal_variance: f64,
    pub rows: Vec<DoubleDescentRow>,
}

impl DoubleDescentResult {
    pub fn row(&self, d: usize) -> Option<&DoubleDescentRow> {
        self.rows.iter().find(|r| r.d == d)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "d",
            "dimension",
            "train_mse",
            "test_mse",
            "ridge_test_mse",
            "ridge_lambda",
            "theta_norm",
            "min_singular",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.d.to_string(),
                r.dimension.to_string(),
                fmt_num(r.train_mse),
                fmt_num(r.test_mse),
                fmt_num(r.ridge_test_mse),
                fmt_num(r.ridge_lambda),
                fmt_num(r.theta_norm),
                fmt_num(r.min_singular),
            ]);
        }
        t
    }
}

fn rows_of(x: &DMatrix<f64>, i: usize) -> [f64; 9] {
    let mut r = [0.0; 9];
    for (j, v) in r.iter_mut().enumerate() {
        *v = x[(i, j)];
    }
    r
}

fn one_dimension(
    d: usize,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    x_test: &DMatrix<f64>,
    y_test: &DVector<f64>,
    grid: &ExperimentGrid,
) -> Result<DoubleDescentRow> {
    let n = x.nrows();
    let basis = AdditiveBasis::build(x, d)?;
    let h = basis.evaluate(x);
    let h_test = basis.evaluate(x_test);
    let theta0 = y.mean();
    let yc = y.add_scalar(-theta0);
    let f = svd_thin(&h)?;
    let rank = f.rank();
    let uty = f.project_response(&yc);

    let coef_at = |shrink: &dyn Fn(f64) -> f64| {
        let mut theta = DVector::zeros(h.ncols());
        for j in 0..rank {
            theta.axpy(shrink(f.d[j]) * uty[j], &f.v.column(j), 1.0);
        }
        theta
    };
    let theta = coef_at(&|s| 1.0 / s);
    let train_mse = (&yc - &h * &theta).norm_squared() / n as f64;
    let ytc = y_test.add_scalar(-theta0);
    let test_mse = (&ytc - &h_test * &theta).norm_squared() / y_test.len() as f64;

    // ridge on the same basis; G = H_test V keeps every λ cheap
    let g = &h_test * f.v.columns(0, rank);
    let d1 = f.d.iter().next().copied().unwrap_or(0.0);
    let lambdas = penalty_grid(grid, d1)?;
    let (mut best, mut best_lambda) = (f64::INFINITY, f64::NAN);
    for &lambda in &lambdas {
        let c = DVector::from_fn(rank, |j, _| f.d[j] / (f.d[j] * f.d[j] + lambda) * uty[j]);
        let mse = (&ytc - &g * c).norm_squared() / y_test.len() as f64;
        if mse < best {
            best = mse;
            best_lambda = lambda;
        }
    }

    let mut full = DMatrix::from_element(n, h.ncols() + 1, 1.0);
    full.columns_mut(1, h.ncols()).copy_from(&h);
    let sv = svd_thin(&full)?;
    let min_singular = sv.d.iter().take(sv.rank()).copied().fold(f64::INFINITY, f64::min);

    Ok(DoubleDescentRow {
        d,
        dimension: h.ncols() + 1,
        train_mse,
        test_mse,
        ridge_test_mse: best,
        ridge_lambda: best_lambda,
        theta_norm: theta.norm(),
        min_singular,
    })
}

/// Additive natural-spline model `y = θ₀ + Σ_j h_j(x_j; d)ᵀθ_j` fit by
/// minimum-norm least squares for every `d`, plus a ridge fit tuned on the
/// test set over a scaled log grid.
pub fn run_double_descent(config: &ExperimentConfig) -> Result<DoubleDescentResult> {
    config.validate(ExperimentKind::DoubleDescent)?;
    if config.p != 9 {
        return Err(RidgeError::invalid("the double-descent truth uses exactly nine inputs"));
    }
    let ExperimentGrid::Dimensions(dims) = &config.grid else {
        return Err(RidgeError::invalid("double descent sweeps spline dimensions"));
    };
    if config.test_size == 0 || config.variance_draws < 2 {
        return Err(RidgeError::invalid("need a test set and at least two variance draws"));
    }
    let seed = config.seed;
    let signal_variance = truth_variance(config.variance_draws, seed);
    let sigma2 = signal_variance / config.snr;
    let sigma = sigma2.sqrt();

    let x = normal_matrix::<f64>(seed, streams::DESIGN, config.n, 9);
    let x_test = normal_matrix::<f64>(seed, streams::TEST, config.test_size, 9);
    let noise = normal_vec::<f64>(seed, streams::NOISE, config.n);
    let noise_test = normal_vec::<f64>(seed, streams::NOISE + 1, config.test_size);
    let y = DVector::from_fn(config.n, |i, _| double_descent_truth(&rows_of(&x, i)) + sigma * noise[i]);
    let y_test =
        DVector::from_fn(config.test_size, |i, _| double_descent_truth(&rows_of(&x_test, i)) + sigma * noise_test[i]);

    let ridge_grid = ExperimentGrid::ScaledLog { count: 50 };
    let rows = dims
        .par_iter()
        .map(|&d| one_dimension(d, &x, &y, &x_test, &y_test, &ridge_grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(DoubleDescentResult { sigma2, signal_variance, rows })
}
