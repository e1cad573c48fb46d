//! Ridge estimation through the normal equations and through the SVD path,
//! minimum-norm least squares, and the fixed-design bias/variance algebra.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::decomp::{spd_solve_vec, svd_full, SvdFactors};
use crate::error::{Result, RidgeError};
use crate::Real;

/// Ridge solution at a single penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit<T: Real> {
    pub lambda: T,
    pub coefficients: DVector<T>,
    pub intercept: Option<T>,
}

impl<T: Real> RidgeFit<T> {
    /// Fitted values on the original response scale.
    pub fn fitted(&self, data: &Dataset<T>) -> DVector<T> {
        predict_working(data, &self.coefficients, &data.x)
    }

    /// Predictions for original-scale rows.
    pub fn predict(&self, data: &Dataset<T>, raw_x: &DMatrix<T>) -> DVector<T> {
        predict_working(data, &self.coefficients, &data.transform(raw_x))
    }
}

pub(crate) fn predict_working<T: Real>(data: &Dataset<T>, beta: &DVector<T>, xw: &DMatrix<T>) -> DVector<T> {
    let eta = xw * beta;
    match data.y_mean {
        Some(m) => eta.add_scalar(m),
        None => eta,
    }
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !lambda.finite() || lambda < T::zero() {
        return Err(RidgeError::domain(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Solves `(XᵀX + λI) β = Xᵀy`.
///
/// `λ = 0` is accepted only for a full-column-rank design; otherwise the
/// least-squares solution is not unique and [`min_norm_fit`] is the explicit
/// alternative.
pub fn ridge_fit<T: Real>(data: &Dataset<T>, lambda: T) -> Result<RidgeFit<T>> {
    check_lambda(lambda)?;
    let (n, p) = data.x.shape();
    let coefficients = if lambda == T::zero() {
        let f = svd_full(&data.x)?;
        if p > n || f.rank() < p {
            return Err(RidgeError::rank(format!(
                "lambda = 0 with a rank-{} design of {} columns has infinitely many solutions; use min_norm_fit",
                f.rank(),
                p
            )));
        }
        min_norm_coefficients(&f, &data.y)
    } else if p <= n {
        let mut gram = data.x.tr_mul(&data.x);
        for i in 0..p {
            gram[(i, i)] += lambda;
        }
        spd_solve_vec(&gram, &data.x.tr_mul(&data.y))
            .ok_or_else(|| RidgeError::rank("ridge system not positive definite"))?
    } else {
        // wide design: β = Xᵀ (XXᵀ + λI)⁻¹ y
        let mut k = &data.x * data.x.transpose();
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        let alpha =
            spd_solve_vec(&k, &data.y).ok_or_else(|| RidgeError::rank("dual ridge system not positive definite"))?;
        data.x.tr_mul(&alpha)
    };
    let intercept = data.intercept_for(&coefficients);
    Ok(RidgeFit { lambda, coefficients, intercept })
}

/// Ridge solutions over a grid of penalties from one shared SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgePath<T: Real> {
    /// Penalties in descending order; row `i` of `coefficients` belongs to `lambdas[i]`.
    pub lambdas: Vec<T>,
    pub coefficients: DMatrix<T>,
    pub factors: SvdFactors<T>,
    pub intercepts: Option<Vec<T>>,
    uty: DVector<T>,
    rank: usize,
}

impl<T: Real> RidgePath<T> {
    /// `Σ_{d_j>0} v_j d_j/(d_j²+λ) ⟨u_j, y⟩` for any `λ > 0`.
    pub fn coefficients_at(&self, lambda: T) -> DVector<T> {
        path_coefficients(&self.factors, &self.uty, self.rank, lambda)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn row(&self, i: usize) -> DVector<T> {
        self.coefficients.row(i).transpose()
    }
}

fn path_coefficients<T: Real>(f: &SvdFactors<T>, uty: &DVector<T>, rank: usize, lambda: T) -> DVector<T> {
    let mut beta = DVector::zeros(f.ncols());
    for j in 0..rank {
        let d = f.d[j];
        beta.axpy(d / (d * d + lambda) * uty[j], &f.v.column(j), T::one());
    }
    beta
}

/// Ridge path over `lambdas` (sorted into descending order).
pub fn ridge_path<T: Real>(data: &Dataset<T>, lambdas: &[T]) -> Result<RidgePath<T>> {
    if lambdas.is_empty() {
        return Err(RidgeError::invalid("empty lambda grid"));
    }
    if let Some(bad) = lambdas.iter().find(|l| !l.finite() || **l <= T::zero()) {
        return Err(RidgeError::domain(format!("path penalties must be positive, got {bad}")));
    }
    let factors = svd_full(&data.x)?;
    let mut grid = lambdas.to_vec();
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let uty = factors.project_response(&data.y);
    let rank = factors.rank();
    let mut coefficients = DMatrix::zeros(grid.len(), data.p());
    for (i, &lam) in grid.iter().enumerate() {
        coefficients.set_row(i, &path_coefficients(&factors, &uty, rank, lam).transpose());
    }
    let intercepts = data
        .has_intercept()
        .then(|| (0..grid.len()).map(|i| data.intercept_for(&coefficients.row(i).transpose()).unwrap()).collect());
    Ok(RidgePath { lambdas: grid, coefficients, factors, intercepts, uty, rank })
}

/// `ŷ_λ = Σ u_j d_j²/(d_j²+λ) ⟨u_j, y⟩`, in the working (centered) scale of
/// the path's design.
pub fn fitted_values<T: Real>(path: &RidgePath<T>, lambda: T, y: &DVector<T>) -> DVector<T> {
    let f = &path.factors;
    let mut fit = DVector::zeros(f.nrows());
    for j in 0..path.rank {
        let d2 = f.d[j] * f.d[j];
        let coord = f.u.column(j).dot(y);
        fit.axpy(d2 / (d2 + lambda) * coord, &f.u.column(j), T::one());
    }
    fit
}

/// Minimum-ℓ₂-norm least-squares solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormFit<T: Real> {
    pub coefficients: DVector<T>,
    pub residual_norm: T,
    pub intercept: Option<T>,
}

pub(crate) fn min_norm_coefficients<T: Real>(f: &SvdFactors<T>, y: &DVector<T>) -> DVector<T> {
    let mut beta = DVector::zeros(f.ncols());
    for j in 0..f.rank() {
        let coord = f.u.column(j).dot(y);
        beta.axpy(coord / f.d[j], &f.v.column(j), T::one());
    }
    beta
}

/// `β_mn = Σ_{d_j>0} v_j (1/d_j) ⟨u_j, y⟩`.
pub fn min_norm_fit<T: Real>(data: &Dataset<T>) -> Result<MinNormFit<T>> {
    let f = svd_full(&data.x)?;
    let coefficients = min_norm_coefficients(&f, &data.y);
    let residual_norm = (&data.y - &data.x * &coefficients).norm();
    let intercept = data.intercept_for(&coefficients);
    Ok(MinNormFit { coefficients, residual_norm, intercept })
}

/// Gradient descent on `½‖y − Xβ‖²` from `β = 0`.
///
/// Yields the iterate after each step. Stops with a divergence error once
/// the residual sum of squares has grown for 10 consecutive steps.
pub struct LeastSquaresDescent<'a, T: Real> {
    x: &'a DMatrix<T>,
    y: &'a DVector<T>,
    step: T,
    beta: DVector<T>,
    last_rss: T,
    growth: usize,
    failed: bool,
}

impl<'a, T: Real> LeastSquaresDescent<'a, T> {
    pub fn new(data: &'a Dataset<T>, step: T) -> Result<Self> {
        if !step.finite() || step <= T::zero() {
            return Err(RidgeError::domain("step size must be positive"));
        }
        Ok(Self {
            x: &data.x,
            y: &data.y,
            step,
            beta: DVector::zeros(data.p()),
            last_rss: data.y.norm_squared(),
            growth: 0,
            failed: false,
        })
    }
}

impl<T: Real> Iterator for LeastSquaresDescent<'_, T> {
    type Item = Result<DVector<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let resid = self.y - self.x * &self.beta;
        self.beta.axpy(self.step, &self.x.tr_mul(&resid), T::one());
        let rss = (self.y - self.x * &self.beta).norm_squared();
        if rss > self.last_rss {
            self.growth += 1;
        } else {
            self.growth = 0;
        }
        self.last_rss = rss;
        if self.growth >= 10 || !rss.finite() {
            self.failed = true;
            return Some(Err(RidgeError::Divergence(format!(
                "residual sum of squares grew for 10 consecutive steps; step {} is too large (needs < 2/d1^2)",
                self.step
            ))));
        }
        Some(Ok(self.beta.clone()))
    }
}

pub fn gradient_descent_least_squares<T: Real>(data: &Dataset<T>, step: T, iters: usize) -> Result<DVector<T>> {
    let mut beta = DVector::zeros(data.p());
    for it in LeastSquaresDescent::new(data, step)?.take(iters) {
        beta = it?;
    }
    Ok(beta)
}

/// True coefficients and noise level of `y = Xβ + ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelTruth<T: Real> {
    pub beta: DVector<T>,
    pub sigma: T,
}

impl<T: Real> LinearModelTruth<T> {
    pub fn new(beta: DVector<T>, sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.finite() {
            return Err(RidgeError::domain("noise standard deviation must be positive"));
        }
        Ok(Self { beta, sigma })
    }
}

/// Shrinkage `λ/(d_j²+λ)` of the j-th right singular direction; directions
/// with zero singular value are shrunk completely.
fn bias_factor<T: Real>(f: &SvdFactors<T>, rank: usize, j: usize, lambda: T) -> T {
    if j < rank {
        let d2 = f.d[j] * f.d[j];
        lambda / (d2 + lambda)
    } else {
        T::one()
    }
}

/// `E β̂_λ − β = −Σ_j v_j λ/(d_j²+λ) ⟨v_j, β⟩` under a fixed design.
pub fn bias_at<T: Real>(factors: &SvdFactors<T>, truth: &LinearModelTruth<T>, lambda: T) -> DVector<T> {
    let rank = factors.rank();
    let mut bias = DVector::zeros(factors.ncols());
    for j in 0..factors.ncols() {
        let v = factors.v.column(j);
        let coef = -bias_factor(factors, rank, j, lambda) * v.dot(&truth.beta);
        bias.axpy(coef, &v, T::one());
    }
    bias
}

/// `Var β̂_λ = σ² Σ_j d_j²/(d_j²+λ)² v_j v_jᵀ`.
pub fn covariance_at<T: Real>(factors: &SvdFactors<T>, truth: &LinearModelTruth<T>, lambda: T) -> Result<DMatrix<T>> {
    check_lambda(lambda)?;
    let rank = factors.rank();
    let p = factors.ncols();
    if lambda == T::zero() && rank < p {
        return Err(RidgeError::rank("OLS covariance needs a full-column-rank design"));
    }
    let sigma2 = truth.sigma * truth.sigma;
    let mut cov = DMatrix::zeros(p, p);
    for j in 0..rank {
        let d2 = factors.d[j] * factors.d[j];
        let w = sigma2 * d2 / ((d2 + lambda) * (d2 + lambda));
        let v = factors.v.column(j);
        cov.ger(w, &v, &v, T::one());
    }
    Ok(cov)
}

/// `MSE(x0, λ) = x0ᵀ Var(β̂_λ) x0 + (x0ᵀ Bias(β̂_λ))²`. Add `σ²` for EPE.
pub fn mse_at<T: Real>(factors: &SvdFactors<T>, truth: &LinearModelTruth<T>, lambda: T, x0: &DVector<T>) -> Result<T> {
    let cov = covariance_at(factors, truth, lambda)?;
    let bias = bias_at(factors, truth, lambda);
    let b = x0.dot(&bias);
    Ok(x0.dot(&(&cov * x0)) + b * b)
}

/// Usual unbiased noise-variance estimate `RSS / (n − p − 1{intercept})`
/// from the OLS fit.
pub fn residual_variance<T: Real>(data: &Dataset<T>) -> Result<T> {
    let df = data.n() as isize - data.p() as isize - isize::from(data.has_intercept());
    if df <= 0 {
        return Err(RidgeError::domain("residual variance needs more rows than parameters"));
    }
    let ols = ridge_fit(data, T::zero())?;
    let rss = (&data.y - &data.x * &ols.coefficients).norm_squared();
    Ok(rss / T::from_count(df as usize))
}

fn james_stein_impl<T: Real>(data: &Dataset<T>, sigma2: T, positive_part: bool) -> Result<DVector<T>> {
    let p = data.p();
    if p < 3 {
        return Err(RidgeError::domain(format!("James-Stein shrinkage needs p >= 3, got {p}")));
    }
    if !sigma2.finite() || sigma2 < T::zero() {
        return Err(RidgeError::domain("noise variance must be nonnegative"));
    }
    let ols = ridge_fit(data, T::zero())?.coefficients;
    let xb = &data.x * &ols;
    let quad = xb.norm_squared();
    if quad == T::zero() {
        return Err(RidgeError::Degenerate("OLS fit is identically zero".into()));
    }
    let mut factor = T::one() - T::from_count(p - 2) * sigma2 / quad;
    if positive_part {
        factor = factor.max(T::zero());
    }
    Ok(ols * factor)
}

/// `[1 − (p−2)σ²/(β̂ᵀXᵀXβ̂)] β̂` with `β̂` the OLS estimate.
pub fn james_stein<T: Real>(data: &Dataset<T>, sigma2: T) -> Result<DVector<T>> {
    james_stein_impl(data, sigma2, false)
}

/// James-Stein with the shrink factor truncated at zero.
pub fn james_stein_positive_part<T: Real>(data: &Dataset<T>, sigma2: T) -> Result<DVector<T>> {
    james_stein_impl(data, sigma2, true)
}

/// Ridge penalty implied by the Gaussian prior `β ~ N(0, σ²_β I)`.
pub fn lambda_from_prior<T: Real>(sigma_eps2: T, sigma_beta2: T) -> Result<T> {
    if !(sigma_eps2 > T::zero()) || !(sigma_beta2 > T::zero()) {
        return Err(RidgeError::domain("prior variances must be positive"));
    }
    Ok(sigma_eps2 / sigma_beta2)
}
