//! Kernel ridge regression, quadratically penalized GLMs (primal and in
//! Cholesky coordinates of the gram matrix), and primal recovery for the
//! linear kernel.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::decomp::{cholesky_jittered, qr, spd_solve_vec};
use crate::error::{Result, RidgeError};
use crate::ridge::RidgeFit;
use crate::Real;

pub const GLM_MAX_ITER: usize = 100;
pub const GLM_MAX_HALVINGS: usize = 50;
pub const GLM_SCORE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind<T: Real> {
    Linear,
    /// `exp(−γ‖x − x'‖²)`
    Rbf {
        gamma: T,
    },
    /// `(⟨x, x'⟩ + offset)^degree`
    Polynomial {
        degree: u32,
        offset: T,
    },
}

impl<T: Real> KernelKind<T> {
    fn validate(&self) -> Result<()> {
        match *self {
            KernelKind::Linear => Ok(()),
            KernelKind::Rbf { gamma } if gamma > T::zero() && gamma.finite() => Ok(()),
            KernelKind::Rbf { gamma } => Err(RidgeError::domain(format!("rbf gamma must be positive, got {gamma}"))),
            KernelKind::Polynomial { degree, offset } if degree >= 1 && offset >= T::zero() && offset.finite() => {
                Ok(())
            }
            KernelKind::Polynomial { .. } => {
                Err(RidgeError::domain("polynomial kernel needs degree >= 1 and offset >= 0"))
            }
        }
    }

    fn eval<'a, I>(&self, a: I, b: I) -> T
    where
        I: Iterator<Item = &'a T> + Clone,
    {
        match *self {
            KernelKind::Linear => a.zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y),
            KernelKind::Rbf { gamma } => {
                let d2 = a.zip(b).fold(T::zero(), |s, (x, y)| s + (*x - *y) * (*x - *y));
                (-gamma * d2).exp()
            }
            KernelKind::Polynomial { degree, offset } => {
                let dot = a.zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y);
                (dot + offset).powi(degree as i32)
            }
        }
    }
}

/// Symmetric gram matrix `K_ij = 𝒦(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T: Real> {
    pub entries: DMatrix<T>,
    pub kind: KernelKind<T>,
}

impl<T: Real> KernelMatrix<T> {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

/// Gram matrix of the working design rows. The linear kind is `XXᵀ`.
pub fn gram<T: Real>(data: &Dataset<T>, kind: KernelKind<T>) -> Result<KernelMatrix<T>> {
    kind.validate()?;
    let entries = match kind {
        KernelKind::Linear => &data.x * data.x.transpose(),
        _ => {
            let n = data.n();
            let mut k = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = kind.eval(data.x.row(i).iter(), data.x.row(j).iter());
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            k
        }
    };
    Ok(KernelMatrix { entries, kind })
}

/// Cross-kernel `𝒦(a_i, b_j)` between two sets of rows.
pub fn gram_cross<T: Real>(kind: KernelKind<T>, a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    kind.validate()?;
    if a.ncols() != b.ncols() {
        return Err(RidgeError::invalid("row sets have different widths"));
    }
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| kind.eval(a.row(i).iter(), b.row(j).iter())))
}

/// Dual solution of a kernel fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFit<T: Real> {
    pub alpha: DVector<T>,
    /// Cholesky coordinates `θ = Rα` with `K = RᵀR`; absent when `K` could
    /// not be factored even after jitter.
    pub theta: Option<DVector<T>>,
    pub lambda: T,
    pub intercept: Option<T>,
    pub kind: KernelKind<T>,
}

impl<T: Real> KernelFit<T> {
    /// `η = Kα (+ intercept)`.
    pub fn fitted(&self, k: &KernelMatrix<T>) -> DVector<T> {
        self.shift(&k.entries * &self.alpha)
    }

    /// Predictions at new rows given the training rows.
    pub fn predict(&self, train_x: &DMatrix<T>, new_x: &DMatrix<T>) -> Result<DVector<T>> {
        Ok(self.shift(gram_cross(self.kind, new_x, train_x)? * &self.alpha))
    }

    fn shift(&self, eta: DVector<T>) -> DVector<T> {
        match self.intercept {
            Some(b) => eta.add_scalar(b),
            None => eta,
        }
    }
}

/// `α = (K + λI)⁻¹ y`; fitted values `Kα`.
pub fn kernel_ridge<T: Real>(k: &KernelMatrix<T>, y: &DVector<T>, lambda: T) -> Result<KernelFit<T>> {
    if !(lambda > T::zero()) || !lambda.finite() {
        return Err(RidgeError::domain("kernel ridge needs a positive penalty"));
    }
    if y.len() != k.n() {
        return Err(RidgeError::invalid("response length does not match kernel size"));
    }
    let mut shifted = k.entries.clone();
    for i in 0..k.n() {
        shifted[(i, i)] += lambda;
    }
    let alpha = spd_solve_vec(&shifted, y).ok_or_else(|| RidgeError::rank("K + λI is not positive definite"))?;
    let theta = cholesky_jittered(&k.entries).ok().map(|c| &c.r * &alpha);
    Ok(KernelFit { alpha, theta, lambda, intercept: None, kind: k.kind })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Log-likelihood taken as `−‖y − η‖²`, so the penalized problem is
    /// exactly ridge at the same λ.
    Gaussian,
    /// Bernoulli with logit link.
    Binomial,
}

/// GLM family with its canonical link, and whether an unpenalized
/// intercept is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlmSpec {
    pub family: Family,
    pub intercept: bool,
}

impl GlmSpec {
    pub fn gaussian() -> Self {
        Self { family: Family::Gaussian, intercept: true }
    }

    pub fn binomial() -> Self {
        Self { family: Family::Binomial, intercept: true }
    }

    pub fn without_intercept(self) -> Self {
        Self { intercept: false, ..self }
    }

    pub fn link(&self) -> &'static str {
        match self.family {
            Family::Gaussian => "identity",
            Family::Binomial => "logit",
        }
    }

    fn validate<T: Real>(&self, y: &DVector<T>) -> Result<()> {
        if !y.iter().all(|v| v.finite()) {
            return Err(RidgeError::invalid("response has non-finite entries"));
        }
        if self.family == Family::Binomial && !y.iter().all(|&v| v == T::zero() || v == T::one()) {
            return Err(RidgeError::invalid("binomial responses must be 0 or 1"));
        }
        Ok(())
    }
}

fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Log-likelihood `ℓ(y, η)` of the family.
pub fn glm_loglik<T: Real>(family: Family, y: &DVector<T>, eta: &DVector<T>) -> T {
    match family {
        Family::Gaussian => -(y - eta).norm_squared(),
        Family::Binomial => y.iter().zip(eta.iter()).fold(T::zero(), |s, (&yi, &e)| s + yi * e - softplus(e)),
    }
}

/// Score `∂ℓ/∂η` and curvature `−∂²ℓ/∂η²`.
fn score_and_weight<T: Real>(family: Family, y: &DVector<T>, eta: &DVector<T>) -> (DVector<T>, DVector<T>) {
    match family {
        Family::Gaussian => ((y - eta) * T::lit(2.0), DVector::from_element(y.len(), T::lit(2.0))),
        Family::Binomial => {
            let mu = eta.map(sigmoid);
            let w = mu.map(|m| m * (T::one() - m));
            (y - mu, w)
        }
    }
}

/// Output of the damped Newton solver.
#[derive(Debug, Clone)]
pub(crate) struct NewtonFit<T: Real> {
    pub coef: DVector<T>,
    pub iterations: usize,
    /// Penalized log-likelihood after each accepted step (first entry is the start).
    pub trace: Vec<T>,
}

/// Maximizes `ℓ(y, Zb) − λ Σ_{j ≥ free} b_j²` by Newton steps with step
/// halving. Columns before `free` are unpenalized.
pub(crate) fn penalized_newton<T: Real>(
    z: &DMatrix<T>,
    y: &DVector<T>,
    family: Family,
    lambda: T,
    free: usize,
) -> Result<NewtonFit<T>> {
    let q = z.ncols();
    let two_lambda = T::lit(2.0) * lambda;
    let objective = |b: &DVector<T>| -> T {
        let pen = b.rows(free, q - free).norm_squared();
        glm_loglik(family, y, &(z * b)) - lambda * pen
    };
    let mut coef = DVector::zeros(q);
    let mut obj = objective(&coef);
    let mut trace = vec![obj];
    let tol = T::lit(GLM_SCORE_TOL);
    let mut grad_norm = T::zero();
    for iter in 0..GLM_MAX_ITER {
        let eta = z * &coef;
        let (s, w) = score_and_weight(family, y, &eta);
        let mut grad = z.tr_mul(&s);
        for j in free..q {
            grad[j] -= two_lambda * coef[j];
        }
        grad_norm = grad.norm();
        if grad_norm < tol {
            return Ok(NewtonFit { coef, iterations: iter, trace });
        }
        let mut zw = z.clone();
        for (i, mut row) in zw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let mut h = z.tr_mul(&zw);
        for j in free..q {
            h[(j, j)] += two_lambda;
        }
        let step =
            spd_solve_vec(&h, &grad).ok_or_else(|| RidgeError::rank("penalized Hessian is not positive definite"))?;
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..=GLM_MAX_HALVINGS {
            let cand = &coef + &step * t;
            let cand_obj = objective(&cand);
            if cand_obj.finite() && cand_obj >= obj {
                coef = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= T::lit(0.5);
        }
        if !accepted {
            // no ascent available at machine precision: stationary point
            if grad_norm < T::lit(1e-6) * (T::one() + obj.abs()) {
                return Ok(NewtonFit { coef, iterations: iter, trace });
            }
            return Err(RidgeError::NotConverged { iterations: iter, last_change: grad_norm.as_f64() });
        }
        trace.push(obj);
    }
    Err(RidgeError::NotConverged { iterations: GLM_MAX_ITER, last_change: grad_norm.as_f64() })
}

fn log_newton<T: Real>(fit: &NewtonFit<T>) {
    if let Some(obj) = fit.trace.last() {
        log::debug!("penalized Newton: {} steps, objective {obj}", fit.iterations);
    }
}

fn with_intercept_column<T: Real>(x: &DMatrix<T>, intercept: bool) -> DMatrix<T> {
    if intercept {
        x.clone().insert_column(0, T::one())
    } else {
        x.clone()
    }
}

/// Maximizes `ℓ(β) − λ‖β‖²` over the working design of `data`, with the
/// response on its original scale. The intercept is reported for
/// original-scale rows.
pub fn ridge_glm_primal<T: Real>(data: &Dataset<T>, spec: GlmSpec, lambda: T) -> Result<RidgeFit<T>> {
    if !(lambda > T::zero()) || !lambda.finite() {
        return Err(RidgeError::domain("penalized GLM needs a positive penalty"));
    }
    let y = data.raw_y();
    spec.validate(&y)?;
    let z = with_intercept_column(&data.x, spec.intercept);
    let free = usize::from(spec.intercept);
    let fit = penalized_newton(&z, &y, spec.family, lambda, free)?;
    log_newton(&fit);
    let coefficients = fit.coef.rows(free, data.p()).into_owned();
    let b0 = if spec.intercept { fit.coef[0] } else { T::zero() };
    let intercept = raw_intercept(data, b0, &coefficients, spec.intercept);
    Ok(RidgeFit { lambda, coefficients, intercept })
}

fn raw_intercept<T: Real>(data: &Dataset<T>, b0: T, beta: &DVector<T>, fitted: bool) -> Option<T> {
    match &data.column_means {
        Some(means) => {
            let slope = match &data.column_scales {
                Some(s) => beta.component_div(s),
                None => beta.clone(),
            };
            Some(b0 - means.dot(&slope))
        }
        None => fitted.then_some(b0),
    }
}

/// Solves `max ℓ(y, Kα) − λαᵀKα` through `K = RᵀR`, `θ = Rα`:
/// `max ℓ(y, Rᵀθ) − λ‖θ‖²`, then `α = R⁻¹θ`.
pub fn ridge_glm_kernel<T: Real>(
    k: &KernelMatrix<T>,
    y: &DVector<T>,
    spec: GlmSpec,
    lambda: T,
) -> Result<KernelFit<T>> {
    if !(lambda > T::zero()) || !lambda.finite() {
        return Err(RidgeError::domain("penalized GLM needs a positive penalty"));
    }
    if y.len() != k.n() {
        return Err(RidgeError::invalid("response length does not match kernel size"));
    }
    spec.validate(y)?;
    let chol = cholesky_jittered(&k.entries)?;
    let z = with_intercept_column(&chol.r.transpose(), spec.intercept);
    let free = usize::from(spec.intercept);
    let fit = penalized_newton(&z, y, spec.family, lambda, free)?;
    log_newton(&fit);
    let theta = fit.coef.rows(free, k.n()).into_owned();
    let alpha = chol.solve_upper(&theta).ok_or_else(|| RidgeError::rank("Cholesky factor is singular"))?;
    Ok(KernelFit { alpha, theta: Some(theta), lambda, intercept: spec.intercept.then(|| fit.coef[0]), kind: k.kind })
}

/// Maps a linear-kernel fit back to `β = Qθ` where `Xᵀ = QR` shares `R`
/// with the Cholesky factor of `K = XXᵀ`.
pub fn primal_recover<T: Real>(data: &Dataset<T>, fit: &KernelFit<T>) -> Result<RidgeFit<T>> {
    if fit.kind != KernelKind::Linear {
        return Err(RidgeError::domain("primal recovery needs a linear-kernel fit"));
    }
    let theta = fit.theta.as_ref().ok_or_else(|| RidgeError::rank("fit has no Cholesky coordinates"))?;
    if theta.len() != data.n() {
        return Err(RidgeError::invalid("fit does not belong to this dataset"));
    }
    if data.p() < data.n() {
        return Err(RidgeError::rank("Xᵀ = QR with a shared Cholesky factor needs p >= n"));
    }
    let f = qr(&data.x.transpose())?;
    let coefficients = &f.q * theta;
    let intercept = match fit.intercept {
        Some(b0) => raw_intercept(data, b0, &coefficients, true),
        None => data.intercept_for(&coefficients),
    };
    Ok(RidgeFit { lambda: fit.lambda, coefficients, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{min_eigenvalue, svd_full};
    use crate::ridge::ridge_fit;
    use crate::rng::{normal_matrix, normal_vec};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn gram_examples() {
        let d = Dataset::new(DMatrix::<f64>::identity(2, 2), dv(&[0.0, 0.0])).unwrap();
        assert_eq!(gram(&d, KernelKind::Linear).unwrap().entries, DMatrix::identity(2, 2));
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, -1.0, 0.5]);
        let d = Dataset::new(x, DVector::zeros(3)).unwrap();
        let k = gram(&d, KernelKind::Rbf { gamma: 0.7 }).unwrap();
        assert_eq!(k.entries[(0, 1)], 1.0);
        assert!(gram(&d, KernelKind::Rbf { gamma: 0.0 }).is_err());
        assert!(gram(&d, KernelKind::Polynomial { degree: 0, offset: 1.0 }).is_err());
    }

    #[test]
    fn linear_gram_matches_naive_loops() {
        let x = normal_matrix::<f64>(1, 0, 8, 300);
        let d = Dataset::new(x.clone(), DVector::zeros(8)).unwrap();
        let k = gram(&d, KernelKind::Linear).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let mut s = 0.0;
                for c in 0..300 {
                    s += x[(i, c)] * x[(j, c)];
                }
                assert!((k.entries[(i, j)] - s).abs() < 1e-12 * s.abs().max(1.0));
            }
        }
    }

    #[test]
    fn kernel_matrices_symmetric_psd() {
        let x = normal_matrix::<f64>(2, 0, 12, 3);
        let d = Dataset::new(x, DVector::zeros(12)).unwrap();
        for kind in
            [KernelKind::Linear, KernelKind::Rbf { gamma: 0.3 }, KernelKind::Polynomial { degree: 3, offset: 1.0 }]
        {
            let k = gram(&d, kind).unwrap().entries;
            assert!((&k - k.transpose()).amax() < 1e-12);
            let top = k.symmetric_eigenvalues().amax();
            assert!(min_eigenvalue(&k) > -1e-8 * top);
            if let KernelKind::Rbf { .. } = kind {
                assert!(k.diagonal().iter().all(|&v| v == 1.0));
                assert!(k.iter().all(|&v| v > 0.0 && v <= 1.0));
            }
        }
    }

    #[test]
    fn kernel_ridge_examples() {
        let k = KernelMatrix { entries: DMatrix::<f64>::identity(2, 2), kind: KernelKind::Linear };
        let fit = kernel_ridge(&k, &dv(&[2.0, 4.0]), 1.0).unwrap();
        assert!((&fit.alpha - dv(&[1.0, 2.0])).norm() < 1e-15);
        assert!((fit.fitted(&k) - dv(&[1.0, 2.0])).norm() < 1e-15);
        assert!((fit.theta.unwrap() - dv(&[1.0, 2.0])).norm() < 1e-15);
    }

    #[test]
    fn dual_matches_primal_wide() {
        let x = normal_matrix::<f64>(3, 0, 20, 500);
        let y = normal_vec::<f64>(3, 333, 20);
        let d = Dataset::new(x.clone(), y.clone()).unwrap();
        let k = gram(&d, KernelKind::Linear).unwrap();
        for &lam in &[0.1, 5.0, 200.0] {
            let fit = kernel_ridge(&k, &y, lam).unwrap();
            let primal = ridge_fit(&d, lam).unwrap();
            assert!((fit.fitted(&k) - &x * &primal.coefficients).norm() < 1e-8 * y.norm());
            // y − fits = λ (K + λI)⁻¹ y = λα
            assert!((&y - fit.fitted(&k) - &fit.alpha * lam).norm() < 1e-10 * y.norm());
            // β lies in the row space: β = Xᵀα
            let null = svd_full(&x).unwrap().null_space();
            assert!(null.tr_mul(&primal.coefficients).norm() < 1e-10 * primal.coefficients.norm().max(1.0));
            assert!((x.tr_mul(&fit.alpha) - &primal.coefficients).norm() < 1e-8 * primal.coefficients.norm());
        }
    }

    #[test]
    fn gaussian_glm_is_ridge() {
        let x = normal_matrix::<f64>(4, 0, 30, 6).add_scalar(1.5);
        let y = normal_vec::<f64>(4, 44, 30).add_scalar(-2.0);
        let raw = Dataset::new(x.clone(), y.clone()).unwrap();
        let centered = Dataset::centered(x.clone(), y.clone()).unwrap();
        let glm = ridge_glm_primal(&raw, GlmSpec::gaussian(), 0.8).unwrap();
        let ridge = ridge_fit(&centered, 0.8).unwrap();
        assert!((&glm.coefficients - &ridge.coefficients).norm() < 1e-9);
        assert!((glm.intercept.unwrap() - ridge.intercept.unwrap()).abs() < 1e-9);
        // same problem posed on the centered dataset
        let glm_c = ridge_glm_primal(&centered, GlmSpec::gaussian(), 0.8).unwrap();
        assert!((glm_c.intercept.unwrap() - ridge.intercept.unwrap()).abs() < 1e-9);
        let no_int = ridge_glm_primal(&raw, GlmSpec::gaussian().without_intercept(), 0.8).unwrap();
        assert!((no_int.coefficients - ridge_fit(&raw, 0.8).unwrap().coefficients).norm() < 1e-9);
    }

    fn separable() -> Dataset<f64> {
        let xs = [-2.0, -1.5, -1.0, -0.6, -0.3, 0.2, 0.4, 0.9, 1.3, 2.1];
        let x = DMatrix::from_column_slice(10, 1, &xs);
        let y = DVector::from_iterator(10, xs.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }));
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn ridge_rescues_separated_logistic() {
        let d = separable();
        let mut last = 0.0;
        for &lam in &[1.0, 0.1, 0.01] {
            let fit = ridge_glm_primal(&d, GlmSpec::binomial(), lam).unwrap();
            let norm = fit.coefficients.norm();
            assert!(norm.is_finite() && norm > last);
            last = norm;
        }
    }

    #[test]
    fn newton_objective_monotone() {
        let d = separable();
        let z = d.x.clone().insert_column(0, 1.0);
        let fit = penalized_newton(&z, &d.y, Family::Binomial, 0.05, 1).unwrap();
        assert!(fit.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(fit.iterations > 1);
    }

    #[test]
    fn binomial_rejects_bad_labels() {
        let d = Dataset::new(DMatrix::identity(2, 2), dv(&[0.0, 2.0])).unwrap();
        assert!(matches!(ridge_glm_primal(&d, GlmSpec::binomial(), 1.0), Err(RidgeError::InvalidInput(_))));
    }

    fn logistic_data(seed: u64, n: usize, p: usize) -> Dataset<f64> {
        let x = normal_matrix::<f64>(seed, 0, n, p) * (1.0 / (p as f64).sqrt());
        let eta = &x * normal_vec::<f64>(seed, 77, p) * 2.0;
        let u = normal_vec::<f64>(seed, 78, n);
        let y = DVector::from_fn(n, |i, _| if eta[i] + 0.5 * u[i] > 0.0 { 1.0 } else { 0.0 });
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn kernel_glm_matches_primal() {
        let d = logistic_data(5, 30, 400);
        let k = gram(&d, KernelKind::Linear).unwrap();
        for spec in [GlmSpec::binomial(), GlmSpec::binomial().without_intercept()] {
            let dual = ridge_glm_kernel(&k, &d.y, spec, 0.5).unwrap();
            let primal = ridge_glm_primal(&d, spec, 0.5).unwrap();
            let eta_primal = (&d.x * &primal.coefficients).add_scalar(primal.intercept.unwrap_or(0.0));
            assert!((dual.fitted(&k) - eta_primal).amax() < 1e-6);
            // ℓ − λθᵀθ = ℓ − λαᵀKα
            let theta = dual.theta.as_ref().unwrap();
            let quad = dual.alpha.dot(&(&k.entries * &dual.alpha));
            assert!((theta.norm_squared() - quad).abs() < 1e-10 * quad.max(1.0));
            let back = primal_recover(&d, &dual).unwrap();
            assert!((back.coefficients - primal.coefficients).norm() < 1e-6);
        }
    }

    #[test]
    fn gaussian_kernel_glm_matches_kernel_ridge() {
        let x = normal_matrix::<f64>(6, 0, 15, 60);
        let y = normal_vec::<f64>(6, 60, 15);
        let d = Dataset::new(x, y.clone()).unwrap();
        let k = gram(&d, KernelKind::Linear).unwrap();
        let a = ridge_glm_kernel(&k, &y, GlmSpec::gaussian().without_intercept(), 0.4).unwrap();
        let b = kernel_ridge(&k, &y, 0.4).unwrap();
        assert!((a.fitted(&k) - b.fitted(&k)).norm() < 1e-8);
    }

    #[test]
    fn primal_recovery() {
        let d = Dataset::new(DMatrix::<f64>::identity(2, 2), dv(&[2.0, 4.0])).unwrap();
        let k = gram(&d, KernelKind::Linear).unwrap();
        let fit = kernel_ridge(&k, &d.y, 1.0).unwrap();
        let beta = primal_recover(&d, &fit).unwrap();
        assert!((&beta.coefficients - ridge_fit(&d, 1.0).unwrap().coefficients).norm() < 1e-14);
        assert!((&beta.coefficients - fit.theta.as_ref().unwrap()).norm() < 1e-14);

        let x = normal_matrix::<f64>(8, 0, 20, 500);
        let y = normal_vec::<f64>(8, 80, 20);
        let d = Dataset::new(x.clone(), y.clone()).unwrap();
        let k = gram(&d, KernelKind::Linear).unwrap();
        let fit = kernel_ridge(&k, &y, 2.0).unwrap();
        let beta = primal_recover(&d, &fit).unwrap();
        let ridge = ridge_fit(&d, 2.0).unwrap();
        assert!((&beta.coefficients - &ridge.coefficients).norm() < 1e-7);
        let x0 = normal_matrix::<f64>(9, 0, 5, 500);
        let dual_pred = fit.predict(&x, &x0).unwrap();
        assert!((&x0 * &beta.coefficients - dual_pred).amax() < 1e-8);

        let rbf = gram(&d, KernelKind::Rbf { gamma: 0.01 }).unwrap();
        let fit = kernel_ridge(&rbf, &y, 1.0).unwrap();
        assert!(matches!(primal_recover(&d, &fit), Err(RidgeError::Domain(_))));
    }
}
