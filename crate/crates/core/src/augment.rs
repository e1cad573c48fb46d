//! Ridge through ordinary or weighted least squares on modified datasets,
//! and the closed form of dropout for linear regression.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::decomp::{spd_factor_strict, svd_thin};
use crate::error::{Result, RidgeError};
use crate::ridge::{min_norm_coefficients, RidgeFit};
use crate::rng::stream_rng;
use crate::Real;

/// Source rows followed by appended rows, with per-row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset<T: Real> {
    pub x: DMatrix<T>,
    pub y: DVector<T>,
    pub weights: DVector<T>,
    pub source_rows: usize,
}

impl<T: Real> AugmentedDataset<T> {
    /// Weighted least squares by `√w` row scaling. Rank-deficient systems
    /// return the minimum-norm solution.
    pub fn solve(&self) -> Result<DVector<T>> {
        weighted_least_squares(&self.x, &self.y, &self.weights)
    }

    pub fn appended_rows(&self) -> usize {
        self.x.nrows() - self.source_rows
    }
}

pub fn weighted_least_squares<T: Real>(x: &DMatrix<T>, y: &DVector<T>, w: &DVector<T>) -> Result<DVector<T>> {
    if w.iter().any(|&v| !(v > T::zero())) {
        return Err(RidgeError::domain("weights must be positive"));
    }
    let sw = w.map(|v| v.sqrt());
    let mut xs = x.clone();
    for (i, mut row) in xs.row_iter_mut().enumerate() {
        row *= sw[i];
    }
    let ys = y.component_mul(&sw);
    let f = svd_thin(&xs)?;
    Ok(min_norm_coefficients(&f, &ys))
}

fn stack<T: Real>(data: &Dataset<T>, extra_x: DMatrix<T>, extra_w: T) -> AugmentedDataset<T> {
    let (n, p) = data.x.shape();
    let a = extra_x.nrows();
    let mut x = DMatrix::zeros(n + a, p);
    x.rows_mut(0, n).copy_from(&data.x);
    x.rows_mut(n, a).copy_from(&extra_x);
    let mut y = DVector::zeros(n + a);
    y.rows_mut(0, n).copy_from(&data.y);
    let mut weights = DVector::from_element(n + a, T::one());
    weights.rows_mut(n, a).fill(extra_w);
    AugmentedDataset { x, y, weights, source_rows: n }
}

/// Appends `√λ I_p` with zero responses; OLS on the result is ridge at `λ`.
///
/// The identity matches the centered ridge fit only for centered data, so
/// an uncentered dataset needs `allow_uncentered`.
pub fn augment_exact<T: Real>(data: &Dataset<T>, lambda: T, allow_uncentered: bool) -> Result<AugmentedDataset<T>> {
    if !(lambda >= T::zero()) || !lambda.finite() {
        return Err(RidgeError::domain("augmentation penalty must be nonnegative"));
    }
    if !allow_uncentered && !data.has_intercept() {
        return Err(RidgeError::Precondition("data are not centered; center them or pass allow_uncentered".into()));
    }
    let p = data.p();
    Ok(stack(data, DMatrix::identity(p, p) * lambda.sqrt(), T::one()))
}

fn gaussian_rows<T: Real>(rows: usize, cols: usize, scale: T, seed: u64, base: u64) -> DMatrix<T> {
    let data: Vec<Vec<T>> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, base + i as u64);
            (0..cols).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)) * scale).collect()
        })
        .collect();
    DMatrix::from_fn(rows, cols, |i, j| data[i][j])
}

/// Appends `n_a` draws from `N(0, λI)` with zero response and weight
/// `1/n_a`; WLS on the result approximates ridge at `λ`.
pub fn augment_stochastic<T: Real>(data: &Dataset<T>, lambda: T, n_a: usize, seed: u64) -> Result<AugmentedDataset<T>> {
    if !(lambda >= T::zero()) || !lambda.finite() {
        return Err(RidgeError::domain("augmentation penalty must be nonnegative"));
    }
    if n_a == 0 {
        return Err(RidgeError::invalid("need at least one augmentation row"));
    }
    if n_a < data.p() {
        log::warn!("n_a = {n_a} is below p = {}; the augmented gram is rank deficient", data.p());
    }
    let extra = gaussian_rows(n_a, data.p(), lambda.sqrt(), seed, 0);
    Ok(stack(data, extra, T::one() / T::from_count(n_a)))
}

/// `m` perturbed copies `x_i + N(0, (λ/n) I)` of every row, each keeping
/// its response `y_i`. Row `i*m + j` is copy `j` of source row `i`.
pub fn augment_perturb<T: Real>(data: &Dataset<T>, lambda: T, m: usize, seed: u64) -> Result<AugmentedDataset<T>> {
    if !(lambda >= T::zero()) || !lambda.finite() {
        return Err(RidgeError::domain("augmentation penalty must be nonnegative"));
    }
    if m == 0 {
        return Err(RidgeError::invalid("need at least one perturbed copy"));
    }
    let (n, p) = data.x.shape();
    let scale = (lambda / T::from_count(n)).sqrt();
    let noise = gaussian_rows(n * m, p, scale, seed, 0);
    let x = DMatrix::from_fn(n * m, p, |r, j| data.x[(r / m, j)] + noise[(r, j)]);
    let y = DVector::from_fn(n * m, |r, _| data.y[r / m]);
    Ok(AugmentedDataset { x, y, weights: DVector::from_element(n * m, T::one()), source_rows: 0 })
}

/// Dropout probability and the column norms `D = diag(‖x_j‖²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutSpec<T: Real> {
    pub phi: T,
    pub column_norms_sq: DVector<T>,
}

impl<T: Real> DropoutSpec<T> {
    pub fn new(phi: T, column_norms_sq: DVector<T>) -> Result<Self> {
        if !(phi >= T::zero() && phi < T::one()) {
            return Err(RidgeError::domain(format!("dropout probability must lie in [0, 1), got {phi}")));
        }
        if column_norms_sq.iter().any(|&v| !(v >= T::zero())) {
            return Err(RidgeError::domain("column norms must be nonnegative"));
        }
        Ok(Self { phi, column_norms_sq })
    }

    /// Spec with `D` taken from the working design of `data`.
    pub fn for_data(data: &Dataset<T>, phi: T) -> Result<Self> {
        let norms = DVector::from_iterator(data.p(), data.x.column_iter().map(|c| c.norm_squared()));
        Self::new(phi, norms)
    }

    /// `φ/(1−φ)`.
    pub fn penalty_ratio(&self) -> T {
        self.phi / (T::one() - self.phi)
    }
}

/// `β = (XᵀX + φ/(1−φ) D)⁻¹ Xᵀy`.
pub fn dropout_closed_form<T: Real>(data: &Dataset<T>, spec: &DropoutSpec<T>) -> Result<RidgeFit<T>> {
    if spec.column_norms_sq.len() != data.p() {
        return Err(RidgeError::invalid("dropout spec has the wrong number of columns"));
    }
    let ratio = spec.penalty_ratio();
    let mut a = data.x.tr_mul(&data.x);
    for j in 0..data.p() {
        a[(j, j)] += ratio * spec.column_norms_sq[j];
    }
    let chol = spd_factor_strict(&a).ok_or_else(|| RidgeError::rank("dropout system is singular"))?;
    let coefficients = chol.solve(&data.x.tr_mul(&data.y));
    let intercept = data.intercept_for(&coefficients);
    Ok(RidgeFit { lambda: ratio, coefficients, intercept })
}

/// Monte-Carlo mean of a per-mask statistic with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate<T: Real> {
    pub mean: DVector<T>,
    pub std_error: DVector<T>,
    pub draws: usize,
}

/// Mask `I_ij ∈ {0, 1/(1−φ)}` for draw `draw`; each draw reads its own stream.
fn mask_for<T: Real>(n: usize, p: usize, phi: f64, seed: u64, draw: usize) -> DMatrix<T> {
    let mut rng = stream_rng(seed, draw as u64);
    let keep = T::lit(1.0 / (1.0 - phi));
    DMatrix::from_fn(n, p, |_, _| if rng.random::<f64>() < phi { T::zero() } else { keep })
}

const CHUNK: usize = 4096;

/// Runs `stat` on every mask and accumulates first and second moments in a
/// fixed chunk order, so the result does not depend on thread count.
fn mask_moments<T: Real, F>(
    n: usize,
    p: usize,
    phi: T,
    masks: usize,
    seed: u64,
    dim: usize,
    stat: F,
) -> MonteCarloEstimate<T>
where
    F: Fn(&DMatrix<T>) -> DVector<T> + Sync,
{
    let chunks = masks.div_ceil(CHUNK);
    let parts: Vec<(DVector<T>, DVector<T>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s1 = DVector::zeros(dim);
            let mut s2 = DVector::zeros(dim);
            for draw in c * CHUNK..((c + 1) * CHUNK).min(masks) {
                let v = stat(&mask_for(n, p, phi.as_f64(), seed, draw));
                s2 += v.component_mul(&v);
                s1 += v;
            }
            (s1, s2)
        })
        .collect();
    let (mut s1, mut s2) = (DVector::zeros(dim), DVector::zeros(dim));
    for (a, b) in parts {
        s1 += a;
        s2 += b;
    }
    let m = T::from_count(masks);
    let mean = &s1 / m;
    let std_error = if masks > 1 {
        let var = (s2 / m - mean.component_mul(&mean)) * (m / (m - T::one()));
        var.map(|v| (v.max(T::zero()) / m).sqrt())
    } else {
        DVector::from_element(dim, T::max_value().unwrap())
    };
    MonteCarloEstimate { mean, std_error, draws: masks }
}

/// Mean and standard error of `stat(X∘I)` over `masks` seeded dropout masks
/// applied to the working design of `data`.
pub fn dropout_monte_carlo<T: Real, F>(
    data: &Dataset<T>,
    phi: T,
    masks: usize,
    seed: u64,
    dim: usize,
    stat: F,
) -> Result<MonteCarloEstimate<T>>
where
    F: Fn(&DMatrix<T>) -> DVector<T> + Sync,
{
    if masks == 0 {
        return Err(RidgeError::invalid("need at least one mask"));
    }
    if !(phi >= T::zero() && phi < T::one()) {
        return Err(RidgeError::domain(format!("dropout probability must lie in [0, 1), got {phi}")));
    }
    let (n, p) = data.x.shape();
    Ok(mask_moments(n, p, phi, masks, seed, dim, |mask| stat(&data.x.component_mul(mask))))
}

/// Monte-Carlo average over seeded masks of the dropout score
/// `∂L_I/∂β = −(X∘I)ᵀ(y − (X∘I)β)` with `L_I` the ½-scaled random loss.
/// Its expectation is `−Xᵀy + XᵀXβ + φ/(1−φ) D β`.
pub fn dropout_score_check<T: Real>(
    data: &Dataset<T>,
    spec: &DropoutSpec<T>,
    beta: &DVector<T>,
    masks: usize,
    seed: u64,
) -> Result<MonteCarloEstimate<T>> {
    if masks == 0 {
        return Err(RidgeError::invalid("need at least one mask"));
    }
    if beta.len() != data.p() {
        return Err(RidgeError::invalid("coefficient length does not match the design"));
    }
    let (n, p) = data.x.shape();
    Ok(mask_moments(n, p, spec.phi, masks, seed, p, |mask| {
        let xi = data.x.component_mul(mask);
        -(xi.tr_mul(&(&data.y - &xi * beta)))
    }))
}

/// Expected dropout score in closed form.
pub fn expected_dropout_score<T: Real>(data: &Dataset<T>, spec: &DropoutSpec<T>, beta: &DVector<T>) -> DVector<T> {
    let xtx_b = data.x.tr_mul(&(&data.x * beta));
    let pen = spec.column_norms_sq.component_mul(beta) * spec.penalty_ratio();
    xtx_b - data.x.tr_mul(&data.y) + pen
}

/// Monte-Carlo average of the random normal equations `(X∘I)ᵀ(X∘I)` and
/// `(X∘I)ᵀy`, stacked column-wise into one vector of length `p² + p`.
pub fn dropout_moment_average<T: Real>(
    data: &Dataset<T>,
    phi: T,
    masks: usize,
    seed: u64,
) -> Result<MonteCarloEstimate<T>> {
    if masks == 0 {
        return Err(RidgeError::invalid("need at least one mask"));
    }
    let (n, p) = data.x.shape();
    Ok(mask_moments(n, p, phi, masks, seed, p * p + p, |mask| {
        let xi = data.x.component_mul(mask);
        let g = xi.tr_mul(&xi);
        let b = xi.tr_mul(&data.y);
        DVector::from_iterator(p * p + p, g.iter().copied().chain(b.iter().copied()))
    }))
}
