//! Exact leave-one-out shortcuts for ridge and minimum-norm fits, k-fold
//! cross-validation, and λ-grid selection.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::decomp::{pinv_default, spd_factor_strict, svd_full, SvdFactors};
use crate::error::{Result, RidgeError};
use crate::rng::stream_rng;
use crate::Real;

/// Leverages within this distance of one are rejected.
pub const LEVERAGE_GUARD: f64 = 1e-12;

/// Ridge operator `R^λ = U S(λ) Uᵀ` with `S(λ) = diag(d_j²/(d_j²+λ))`.
#[derive(Debug, Clone)]
pub struct RidgeOperator<T: Real> {
    pub factors: SvdFactors<T>,
}

impl<T: Real> RidgeOperator<T> {
    pub fn new(x: &DMatrix<T>) -> Result<Self> {
        Ok(Self { factors: svd_full(x)? })
    }

    /// Diagonal of `S(λ)` for the retained singular values.
    pub fn shrinkage(&self, lambda: T) -> DVector<T> {
        let r = self.factors.rank();
        DVector::from_fn(r, |j, _| {
            let d2 = self.factors.d[j] * self.factors.d[j];
            d2 / (d2 + lambda)
        })
    }

    pub fn matrix(&self, lambda: T) -> DMatrix<T> {
        let s = self.shrinkage(lambda);
        let u = self.factors.u.columns(0, s.len());
        let us = DMatrix::from_fn(u.nrows(), s.len(), |i, j| u[(i, j)] * s[j]);
        us * u.transpose()
    }

    /// `R^λ_ii` without forming the full matrix.
    pub fn diagonal(&self, lambda: T) -> DVector<T> {
        let s = self.shrinkage(lambda);
        let u = &self.factors.u;
        DVector::from_fn(u.nrows(), |i, _| (0..s.len()).fold(T::zero(), |acc, j| acc + s[j] * u[(i, j)] * u[(i, j)]))
    }

    /// Effective degrees of freedom `Σ_j d_j²/(d_j²+λ)`.
    pub fn trace(&self, lambda: T) -> T {
        self.shrinkage(lambda).sum()
    }

    pub fn apply(&self, lambda: T, y: &DVector<T>) -> DVector<T> {
        let s = self.shrinkage(lambda);
        let u = self.factors.u.columns(0, s.len());
        let coords = u.tr_mul(y).component_mul(&s);
        u * coords
    }
}

/// Leave-one-out residuals `y_i − x_iᵀ β^{(−i)}` and their sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct LooResult<T: Real> {
    pub lambda: T,
    pub loo_sum: T,
    pub per_point: DVector<T>,
    /// Rank of the kernel matrix the shortcut inverted, where relevant.
    pub kernel_rank: Option<usize>,
}

impl<T: Real> LooResult<T> {
    fn from_residuals(lambda: T, per_point: DVector<T>, kernel_rank: Option<usize>) -> Self {
        let loo_sum = per_point.norm_squared();
        Self { lambda, loo_sum, per_point, kernel_rank }
    }

    /// Mean squared LOO residual.
    pub fn mean(&self) -> T {
        self.loo_sum / T::from_count(self.per_point.len())
    }
}

/// LOO residuals from the full fit: `(y_i − ŷ_i)/(1 − R^λ_ii)`.
///
/// With an intercept the smoother is `11ᵀ/n + R^λ` on the centered design,
/// and the same shortcut holds for refits that re-center each subsample.
pub fn loo_ridge<T: Real>(data: &Dataset<T>, lambda: T) -> Result<LooResult<T>> {
    let op = RidgeOperator::new(&data.x)?;
    loo_ridge_with(&op, data, lambda)
}

/// [`loo_ridge`] reusing a precomputed operator for the same design.
pub fn loo_ridge_with<T: Real>(op: &RidgeOperator<T>, data: &Dataset<T>, lambda: T) -> Result<LooResult<T>> {
    let n = data.n();
    if n < 2 {
        return Err(RidgeError::invalid("leave-one-out needs at least two rows"));
    }
    if !(lambda > T::zero()) || !lambda.finite() {
        return Err(RidgeError::domain("loo_ridge needs a positive penalty"));
    }
    let fit = op.apply(lambda, &data.y);
    let mut lev = op.diagonal(lambda);
    if data.has_intercept() {
        lev.add_scalar_mut(T::one() / T::from_count(n));
    }
    let guard = T::one() - T::lit(LEVERAGE_GUARD);
    let mut per_point = DVector::zeros(n);
    for i in 0..n {
        if lev[i] >= guard {
            return Err(RidgeError::Degenerate(format!("leverage of row {i} is {}, too close to one", lev[i])));
        }
        per_point[i] = (data.y[i] - fit[i]) / (T::one() - lev[i]);
    }
    Ok(LooResult::from_residuals(lambda, per_point, None))
}

/// Minimum-norm LOO residuals `{K⁻¹y}_i / {K⁻¹}_ii` with `K = XXᵀ`.
///
/// Applies without an intercept; centered datasets go through
/// [`loo_min_norm_centered`].
pub fn loo_min_norm<T: Real>(data: &Dataset<T>) -> Result<LooResult<T>> {
    let (n, p) = data.x.shape();
    if p <= n {
        return Err(RidgeError::invalid(format!("loo_min_norm needs p > n, got {n}x{p}")));
    }
    if data.has_intercept() {
        return Err(RidgeError::invalid("dataset carries an intercept; use loo_min_norm_centered"));
    }
    let k = &data.x * data.x.transpose();
    let kinv = spd_factor_strict(&k)
        .map(|c| c.inverse())
        .ok_or_else(|| RidgeError::rank("gram matrix is singular; use loo_min_norm_centered or explicit refits"))?;
    let a = &kinv * &data.y;
    let per_point = DVector::from_fn(n, |i, _| a[i] / kinv[(i, i)]);
    Ok(LooResult::from_residuals(T::zero(), per_point, Some(n)))
}

/// Minimum-norm LOO with an unpenalized intercept, via the pseudo-inverse of
/// the doubly-centered kernel `K̃ = (I−M)XXᵀ(I−M)`. Residuals are
/// `{K̃⁺y}_i / {K̃⁺}_ii` and `loo_sum` is their sum of squares.
pub fn loo_min_norm_centered<T: Real>(data: &Dataset<T>) -> Result<LooResult<T>> {
    let (n, p) = data.x.shape();
    if p <= n {
        return Err(RidgeError::invalid(format!("loo_min_norm_centered needs p > n, got {n}x{p}")));
    }
    let k = &data.x * data.x.transpose();
    let kt = double_center(&k);
    let kp = pinv_default(&kt)?;
    if kp.source_rank + 1 > n {
        return Err(RidgeError::Degenerate(format!("doubly-centered kernel has rank {} > n - 1", kp.source_rank)));
    }
    let a = &kp.matrix * &data.y;
    let mut per_point = DVector::zeros(n);
    for i in 0..n {
        let dii = kp.matrix[(i, i)];
        if dii.abs() <= T::lit(1e-14) * kp.matrix.amax() {
            return Err(RidgeError::Degenerate(format!("pseudo-inverse diagonal vanishes at row {i}")));
        }
        per_point[i] = a[i] / dii;
    }
    Ok(LooResult::from_residuals(T::zero(), per_point, Some(kp.source_rank)))
}

/// `(I − 11ᵀ/n) K (I − 11ᵀ/n)`.
pub fn double_center<T: Real>(k: &DMatrix<T>) -> DMatrix<T> {
    let n = k.nrows();
    let nf = T::from_count(n);
    let row_means = DVector::from_fn(n, |i, _| k.row(i).sum() / nf);
    let col_means = DVector::from_fn(n, |j, _| k.column(j).sum() / nf);
    let grand = row_means.sum() / nf;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Scores over a λ grid and the selected index.
#[derive(Debug, Clone, PartialEq)]
pub struct CvGrid<T: Real> {
    pub lambdas: Vec<T>,
    pub scores: Vec<T>,
    pub selected: usize,
}

impl<T: Real> CvGrid<T> {
    /// Picks the minimizing score; ties go to the larger λ.
    pub fn new(lambdas: Vec<T>, scores: Vec<T>) -> Result<Self> {
        if lambdas.is_empty() || lambdas.len() != scores.len() {
            return Err(RidgeError::invalid("CV grid needs matching nonempty lambdas and scores"));
        }
        let mut best = 0;
        for i in 1..lambdas.len() {
            let better = scores[i] < scores[best];
            let tie_larger = scores[i] == scores[best] && lambdas[i] > lambdas[best];
            if better || tie_larger {
                best = i;
            }
        }
        Ok(Self { lambdas, scores, selected: best })
    }

    pub fn selected_lambda(&self) -> T {
        self.lambdas[self.selected]
    }

    pub fn selected_score(&self) -> T {
        self.scores[self.selected]
    }
}

/// Mean LOO squared residual at every λ of the grid.
pub fn loo_grid<T: Real>(data: &Dataset<T>, lambdas: &[T]) -> Result<CvGrid<T>> {
    if lambdas.is_empty() {
        return Err(RidgeError::invalid("empty lambda grid"));
    }
    let op = RidgeOperator::new(&data.x)?;
    let scores =
        lambdas.par_iter().map(|&l| loo_ridge_with(&op, data, l).map(|r| r.mean())).collect::<Result<Vec<_>>>()?;
    CvGrid::new(lambdas.to_vec(), scores)
}

/// Seeded fold labels: uniform shuffle, then contiguous blocks whose sizes
/// differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let mut folds = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &row in &order[pos..pos + size] {
            folds[row] = f;
        }
        pos += size;
    }
    folds
}

/// k-fold CV: mean held-out squared error per λ. Each training fold is
/// re-preprocessed with the dataset's own centering/standardization.
pub fn kfold_cv<T: Real>(data: &Dataset<T>, lambdas: &[T], k: usize, seed: u64) -> Result<CvGrid<T>> {
    let n = data.n();
    if lambdas.is_empty() {
        return Err(RidgeError::invalid("empty lambda grid"));
    }
    if k < 2 || k > n {
        return Err(RidgeError::invalid(format!("fold count must satisfy 2 <= k <= n = {n}, got {k}")));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l > T::zero())) {
        return Err(RidgeError::domain(format!("CV penalties must be positive, got {bad}")));
    }
    let folds = fold_assignment(n, k, seed);
    let raw_x = data.raw_x();
    let raw_y = data.raw_y();
    let per_fold: Vec<Vec<T>> = (0..k)
        .into_par_iter()
        .map(|f| -> Result<Vec<T>> {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let tr = data.subset(&train)?;
            let factors = svd_full(&tr.x)?;
            let uty = factors.project_response(&tr.y);
            let rank = factors.rank();
            let xt = tr.transform(&raw_x.select_rows(&test));
            lambdas
                .iter()
                .map(|&lam| {
                    let mut beta = DVector::zeros(tr.p());
                    for j in 0..rank {
                        let d = factors.d[j];
                        beta.axpy(d / (d * d + lam) * uty[j], &factors.v.column(j), T::one());
                    }
                    let pred = crate::ridge::predict_working(&tr, &beta, &xt);
                    Ok(test.iter().enumerate().fold(T::zero(), |acc, (t, &i)| {
                        let e = raw_y[i] - pred[t];
                        acc + e * e
                    }))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let nf = T::from_count(n);
    let scores = (0..lambdas.len()).map(|l| per_fold.iter().fold(T::zero(), |acc, f| acc + f[l]) / nf).collect();
    CvGrid::new(lambdas.to_vec(), scores)
}
