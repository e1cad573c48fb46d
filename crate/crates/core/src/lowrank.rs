//! Rank-constrained and nuclear-norm approximation, alternating ridge
//! factorization, and matrix completion over an observation mask.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decomp::{spd_solve, svd_thin};
use crate::error::{Result, RidgeError};
use crate::rng::stream_rng;
use crate::Real;

/// A nuclear threshold `τ` corresponds to the factor penalty `λ` with
/// `τ = THRESHOLD_RATIO * λ`, for the objective
/// `‖X − ABᵀ‖²_F + (λ/2)(‖A‖²_F + ‖B‖²_F)`.
pub const THRESHOLD_RATIO: f64 = 0.5;

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Values with an observation mask; unobserved entries are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix<T: Real> {
    values: DMatrix<T>,
    observed: DMatrix<bool>,
}

impl<T: Real> MaskedMatrix<T> {
    /// Unobserved values are replaced by zero.
    pub fn new(values: DMatrix<T>, observed: DMatrix<bool>) -> Result<Self> {
        if values.shape() != observed.shape() {
            return Err(RidgeError::invalid("mask and values differ in shape"));
        }
        let mut values = values;
        for (v, &o) in values.iter_mut().zip(observed.iter()) {
            if !o {
                *v = T::zero();
            } else if !v.finite() {
                return Err(RidgeError::invalid("observed entries must be finite"));
            }
        }
        Ok(Self { values, observed })
    }

    pub fn dense(values: DMatrix<T>) -> Result<Self> {
        let observed = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, observed)
    }

    /// `None` marks a missing cell.
    pub fn from_rows(rows: &[Vec<Option<T>>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(RidgeError::invalid("ragged rows"));
        }
        let values = DMatrix::from_fn(m, n, |i, j| rows[i][j].unwrap_or(T::zero()));
        let observed = DMatrix::from_fn(m, n, |i, j| rows[i][j].is_some());
        Self::new(values, observed)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn observed(&self) -> &DMatrix<bool> {
        &self.observed
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[(i, j)]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// `P_Ω(m)`: zeroes the unobserved entries of `m`.
    pub fn project(&self, m: &DMatrix<T>) -> DMatrix<T> {
        m.zip_map(&self.observed, |v, o| if o { v } else { T::zero() })
    }
}

/// Factors `A` (m×q) and `B` (n×q) with the penalty they were fit at.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub lambda: T,
    pub iterations: usize,
    /// Objective after initialization and after every sweep.
    pub objective: Vec<T>,
}

impl<T: Real> FactorPair<T> {
    pub fn product(&self) -> DMatrix<T> {
        &self.a * self.b.transpose()
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }
}

/// Failure of an alternating procedure. Running out of iterations keeps
/// the last iterate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError<T: Real> {
    #[error(transparent)]
    Ridge(#[from] RidgeError),
    #[error("no convergence after {iterations} sweeps (last relative change {last_change:e})")]
    NotConverged { last: Box<FactorPair<T>>, iterations: usize, last_change: f64 },
}

impl<T: Real> From<FactorError<T>> for RidgeError {
    fn from(e: FactorError<T>) -> Self {
        match e {
            FactorError::Ridge(r) => r,
            FactorError::NotConverged { iterations, last_change, .. } => {
                RidgeError::NotConverged { iterations, last_change }
            }
        }
    }
}

/// Truncated SVD reconstruction keeping the top `q` singular triplets.
pub fn best_rank_q<T: Real>(x: &DMatrix<T>, q: usize) -> Result<DMatrix<T>> {
    let f = svd_thin(x)?;
    let m = f.d.len();
    let q = if q > m {
        log::warn!("rank {q} exceeds min(m, n) = {m}; clamping");
        m
    } else {
        q
    };
    let scaled = DMatrix::from_fn(x.nrows(), q, |i, j| f.u[(i, j)] * f.d[j]);
    Ok(scaled * f.v.columns(0, q).transpose())
}

/// SVD reconstruction with every singular value replaced by `(d_i − λ)₊`.
pub fn soft_threshold_svd<T: Real>(x: &DMatrix<T>, lambda: T) -> Result<DMatrix<T>> {
    if !(lambda >= T::zero()) {
        return Err(RidgeError::domain("threshold must be nonnegative"));
    }
    let f = svd_thin(x)?;
    let m = f.d.len();
    let scaled = DMatrix::from_fn(x.nrows(), m, |i, j| f.u[(i, j)] * (f.d[j] - lambda).max(T::zero()));
    Ok(scaled * f.v.columns(0, m).transpose())
}

/// `‖P_Ω(X − ABᵀ)‖²_F + (λ/2)(‖A‖²_F + ‖B‖²_F)`.
pub fn factor_objective<T: Real>(x: &MaskedMatrix<T>, a: &DMatrix<T>, b: &DMatrix<T>, lambda: T) -> T {
    let resid = x.project(&(x.values() - a * b.transpose()));
    resid.norm_squared() + lambda * T::lit(0.5) * (a.norm_squared() + b.norm_squared())
}

fn check_factor_args<T: Real>(lambda: T, q: usize, tol: T, max_iter: usize) -> Result<()> {
    if !(lambda > T::zero()) || !lambda.finite() {
        return Err(RidgeError::domain("factor penalty must be positive"));
    }
    if q == 0 {
        return Err(RidgeError::invalid("rank must be at least one"));
    }
    if !(tol > T::zero()) {
        return Err(RidgeError::domain("tolerance must be positive"));
    }
    if max_iter == 0 {
        return Err(RidgeError::invalid("need at least one sweep"));
    }
    Ok(())
}

fn initial_a<T: Real>(m: usize, q: usize, seed: u64) -> DMatrix<T> {
    let mut rng = stream_rng(seed, 0);
    let scale = T::one() / T::from_count(q).sqrt();
    // row-major fill so the draw order is independent of storage layout
    let vals: Vec<T> = (0..m * q).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)) * scale).collect();
    DMatrix::from_row_slice(m, q, &vals)
}

/// Ridge of every row of `target` (restricted to its observed entries) on
/// the rows of `design`; returns one q-vector per row of `target`.
fn masked_ridge_rows<T: Real>(
    target: &DMatrix<T>,
    observed: &DMatrix<bool>,
    design: &DMatrix<T>,
    half_lambda: T,
) -> Result<DMatrix<T>> {
    let q = design.ncols();
    let rows: Vec<Result<DVector<T>>> = (0..target.nrows())
        .into_par_iter()
        .map(|i| {
            let mut gram = DMatrix::<T>::identity(q, q) * half_lambda;
            let mut rhs = DVector::<T>::zeros(q);
            for j in 0..target.ncols() {
                if observed[(i, j)] {
                    let d = design.row(j);
                    gram += d.transpose() * d;
                    rhs.axpy(target[(i, j)], &d.transpose(), T::one());
                }
            }
            spd_solve(&gram, &DMatrix::from_column_slice(q, 1, rhs.as_slice()))
                .map(|s| s.column(0).into_owned())
                .ok_or_else(|| RidgeError::rank("factor ridge system is singular"))
        })
        .collect();
    let mut out = DMatrix::zeros(target.nrows(), q);
    for (i, r) in rows.into_iter().enumerate() {
        out.row_mut(i).tr_copy_from(&r?);
    }
    Ok(out)
}

fn alternate<T: Real>(
    x: &MaskedMatrix<T>,
    q: usize,
    lambda: T,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> std::result::Result<FactorPair<T>, FactorError<T>> {
    check_factor_args(lambda, q, tol, max_iter)?;
    let (m, _) = x.shape();
    let half = lambda * T::lit(0.5);
    let xt = x.values().transpose();
    let mask_t = x.observed().transpose();
    let mut a = initial_a::<T>(m, q, seed);
    let mut b = masked_ridge_rows(&xt, &mask_t, &a, half)?;
    let mut objective = vec![factor_objective(x, &a, &b, lambda)];
    let mut prev = &a * b.transpose();
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        a = masked_ridge_rows(x.values(), x.observed(), &b, half)?;
        b = masked_ridge_rows(&xt, &mask_t, &a, half)?;
        objective.push(factor_objective(x, &a, &b, lambda));
        let cur = &a * b.transpose();
        let denom = prev.norm().max(T::lit(f64::MIN_POSITIVE));
        last_change = ((&cur - &prev).norm() / denom).as_f64();
        prev = cur;
        if last_change < tol.as_f64() || prev.norm() == T::zero() {
            return Ok(FactorPair { a, b, lambda, iterations: it, objective });
        }
    }
    log::warn!("alternating ridge stopped after {max_iter} sweeps");
    Err(FactorError::NotConverged {
        last: Box::new(FactorPair { a, b, lambda, iterations: max_iter, objective }),
        iterations: max_iter,
        last_change,
    })
}

/// Alternates `Bᵀ = (AᵀA + (λ/2)I)⁻¹AᵀX` and `Aᵀ = (BᵀB + (λ/2)I)⁻¹BᵀXᵀ`
/// from a seeded Gaussian `A`. With enough rank the product converges to
/// `soft_threshold_svd(x, THRESHOLD_RATIO * λ)`.
pub fn alternating_ridge<T: Real>(
    x: &DMatrix<T>,
    q: usize,
    lambda: T,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> std::result::Result<FactorPair<T>, FactorError<T>> {
    alternate(&MaskedMatrix::dense(x.clone())?, q, lambda, tol, max_iter, seed)
}

/// Alternating ridge where each row and column regression only sees its
/// observed entries.
pub fn soft_impute<T: Real>(
    x: &MaskedMatrix<T>,
    lambda: T,
    q: usize,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> std::result::Result<FactorPair<T>, FactorError<T>> {
    if x.observed_count() == 0 {
        return Err(RidgeError::invalid("no observed entries").into());
    }
    let (m, n) = x.shape();
    if q > m.min(n) {
        return Err(RidgeError::invalid(format!("rank {q} exceeds min(m, n) = {}", m.min(n))).into());
    }
    alternate(x, q, lambda, tol, max_iter, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::normal_matrix;

    fn diag(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
    }

    #[test]
    fn rank_truncation() {
        assert!((best_rank_q(&diag(3.0, 1.0), 1).unwrap() - diag(3.0, 0.0)).norm() < 1e-12);
        let x = normal_matrix::<f64>(1, 0, 6, 5);
        assert!((best_rank_q(&x, 5).unwrap() - &x).norm() < 1e-10);
        assert!((best_rank_q(&x, 9).unwrap() - &x).norm() < 1e-10);
        assert_eq!(best_rank_q(&x, 0).unwrap(), DMatrix::zeros(6, 5));

        // random rank-2 candidates never beat the truncation
        let best = (best_rank_q(&x, 2).unwrap() - &x).norm();
        for k in 0..500u64 {
            let l = normal_matrix::<f64>(2, 10 * k, 6, 2);
            let r = normal_matrix::<f64>(3, 10 * k, 2, 5);
            // least-squares scale of the candidate so the search is not trivially bad
            let c = &l * &r;
            let s = c.dot(&x) / c.norm_squared();
            assert!((&c * s - &x).norm() >= best - 1e-12);
        }
    }

    #[test]
    fn soft_threshold_examples() {
        let x = diag(3.0, 1.0);
        assert!((soft_threshold_svd(&x, 2.0).unwrap() - diag(1.0, 0.0)).norm() < 1e-12);
        assert!((soft_threshold_svd(&x, 0.0).unwrap() - &x).norm() < 1e-12);
        assert_eq!(soft_threshold_svd(&x, 3.0).unwrap().norm(), 0.0);
        let x = normal_matrix::<f64>(4, 0, 8, 6);
        let d = svd_thin(&x).unwrap().d;
        let lam = 0.5 * (d[1] + d[2]);
        let got = svd_thin(&soft_threshold_svd(&x, lam).unwrap()).unwrap().d;
        for i in 0..6 {
            assert!((got[i] - (d[i] - lam).max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_ratio_pinned_on_diagonal() {
        // d = λ/2 exactly for the second value, so the convergence there is sublinear
        let fit = alternating_ridge(&diag(3.0, 1.0), 2, 2.0, 1e-12, 200_000, 0);
        let pair = match fit {
            Ok(p) => p,
            Err(FactorError::NotConverged { last, .. }) => *last,
            Err(e) => panic!("{e}"),
        };
        let target = soft_threshold_svd(&diag(3.0, 1.0), THRESHOLD_RATIO * 2.0).unwrap();
        assert!((pair.product() - &target).norm() < 1e-2);
        let other = soft_threshold_svd(&diag(3.0, 1.0), 2.0).unwrap();
        assert!((pair.product() - other).norm() > 0.5);

        // a diagonal with a clear gap converges tightly
        let x = diag(5.0, 1.0);
        let pair = alternating_ridge(&x, 2, 4.0, 1e-14, 10_000, 3).unwrap();
        assert!((pair.product() - diag(3.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn large_penalty_zeroes_product() {
        let x = normal_matrix::<f64>(5, 0, 10, 7);
        let d1 = svd_thin(&x).unwrap().d[0];
        let pair = alternating_ridge(&x, 3, 2.5 * d1, 1e-10, 5000, 1).unwrap();
        assert!(pair.product().norm() < 1e-6);
    }

    #[test]
    fn objective_is_monotone() {
        let x = normal_matrix::<f64>(6, 0, 20, 15);
        let pair = alternating_ridge(&x, 5, 3.0, 1e-9, 5000, 2).unwrap();
        for w in pair.objective.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dense_equivalence() {
        let x = normal_matrix::<f64>(7, 0, 12, 9);
        let d = svd_thin(&x).unwrap().d;
        let lam = d[3] + d[4];
        let pair = alternating_ridge(&x, 9, lam, 1e-13, 20_000, 4).unwrap();
        let target = soft_threshold_svd(&x, THRESHOLD_RATIO * lam).unwrap();
        assert!((pair.product() - target).norm() < 1e-6);
    }

    #[test]
    fn full_mask_matches_dense() {
        let x = normal_matrix::<f64>(8, 0, 10, 8);
        let a = alternating_ridge(&x, 4, 2.0, 1e-12, 10_000, 5).unwrap();
        let b = soft_impute(&MaskedMatrix::dense(x).unwrap(), 2.0, 4, 1e-12, 10_000, 5).unwrap();
        assert!((a.product() - b.product()).norm() < 1e-6);
    }

    #[test]
    fn completion_edge_cases() {
        let mut obs = DMatrix::from_element(4, 3, false);
        let empty = MaskedMatrix::new(DMatrix::<f64>::zeros(4, 3), obs.clone()).unwrap();
        assert!(matches!(
            soft_impute(&empty, 1.0, 2, 1e-7, 100, 0),
            Err(FactorError::Ridge(RidgeError::InvalidInput(_)))
        ));
        obs[(1, 2)] = true;
        let mut vals = DMatrix::zeros(4, 3);
        vals[(1, 2)] = 5.0;
        let one = MaskedMatrix::new(vals, obs).unwrap();
        let fit = soft_impute(&one, 1e3, 2, 1e-9, 1000, 0).unwrap();
        assert!(fit.product().norm() < 1e-6);
        assert!(soft_impute(&one, 1.0, 4, 1e-9, 1000, 0).is_err());
    }

    #[test]
    fn held_in_error_shrinks_with_penalty() {
        let u = normal_matrix::<f64>(9, 0, 20, 2);
        let v = normal_matrix::<f64>(9, 100, 15, 2);
        let x = &u * v.transpose();
        let mut rng = stream_rng(9, 999);
        let obs = DMatrix::from_fn(20, 15, |_, _| rng.random::<f64>() > 0.3);
        let mm = MaskedMatrix::new(x, obs).unwrap();
        let mut last = f64::INFINITY;
        for lam in [20.0, 5.0, 1.0, 0.1] {
            let fit = soft_impute(&mm, lam, 2, 1e-10, 20_000, 1).unwrap();
            let err = mm.project(&(fit.product() - mm.values())).norm();
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn non_convergence_keeps_iterate() {
        let x = normal_matrix::<f64>(10, 0, 6, 5);
        match alternating_ridge(&x, 3, 1.0, 1e-15, 2, 0) {
            Err(FactorError::NotConverged { last, iterations, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last.objective.len(), 3);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            alternating_ridge(&x, 3, 1.0, 1e-9, 1000, 7).unwrap(),
            alternating_ridge(&x, 3, 1.0, 1e-9, 1000, 7).unwrap()
        );
    }
}
