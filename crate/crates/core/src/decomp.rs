//! Factorizations consumed by the rest of the crate: full SVD, thin QR,
//! Cholesky with a single jitter retry, and the Moore-Penrose inverse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RidgeError};
use crate::Real;

/// Singular values below `RANK_TOL * d1` count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Full-form SVD `x = u * diag(d) * vᵀ` with `u` n×n and `v` p×p.
///
/// `d` holds the `min(n, p)` singular values in descending order. Each of
/// the first `min(n, p)` columns of `v` has its largest-magnitude entry made
/// nonnegative (the paired column of `u` is flipped along with it).
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors<T: Real> {
    pub u: DMatrix<T>,
    pub d: DVector<T>,
    pub v: DMatrix<T>,
}

impl<T: Real> SvdFactors<T> {
    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// Number of singular values above `RANK_TOL * d1`.
    pub fn rank(&self) -> usize {
        self.rank_with(T::lit(RANK_TOL))
    }

    pub fn rank_with(&self, tol: T) -> usize {
        let Some(&d1) = self.d.iter().next() else {
            return 0;
        };
        let cutoff = tol * d1;
        self.d.iter().filter(|&&s| s > cutoff && s > T::zero()).count()
    }

    /// Reassembles `u * D * vᵀ` with `D` the padded n×p diagonal.
    pub fn reconstruct(&self) -> DMatrix<T> {
        let m = self.d.len();
        let us = DMatrix::from_fn(self.nrows(), m, |i, j| self.u[(i, j)] * self.d[j]);
        us * self.v.columns(0, m).transpose()
    }

    /// Columns of `v` spanning the row space (`Ṽ` restricted to nonzero `d_j`).
    pub fn row_space(&self) -> DMatrix<T> {
        self.v.columns(0, self.rank()).into_owned()
    }

    /// Columns of `v` spanning the null space of the design (`Ṽ⊥`).
    pub fn null_space(&self) -> DMatrix<T> {
        let r = self.rank();
        self.v.columns(r, self.ncols() - r).into_owned()
    }

    /// `⟨u_j, y⟩` for the first `min(n, p)` left singular vectors.
    pub fn project_response(&self, y: &DVector<T>) -> DVector<T> {
        let m = self.d.len();
        self.u.columns(0, m).tr_mul(y)
    }
}

fn check_finite<T: Real>(x: &DMatrix<T>) -> Result<()> {
    if x.iter().all(|v| v.finite()) {
        Ok(())
    } else {
        Err(RidgeError::invalid("matrix has non-finite entries"))
    }
}

/// Orthonormal n×n basis whose leading columns are exactly `q`.
///
/// `q` must have orthonormal columns. The remaining columns come from the
/// Householder QR of `[q | I]`.
pub fn complete_basis<T: Real>(q: &DMatrix<T>) -> DMatrix<T> {
    let (n, m) = q.shape();
    if m >= n {
        return q.columns(0, n).into_owned();
    }
    let mut stacked = DMatrix::zeros(n, m + n);
    stacked.columns_mut(0, m).copy_from(q);
    stacked.columns_mut(m, n).fill_with_identity();
    let mut full = stacked.qr().q();
    full.columns_mut(0, m).copy_from(q);
    for j in m..n {
        normalize_sign(&mut full, j, None);
    }
    full
}

/// Flips column `j` of `a` (and of `partner`) so its largest-magnitude entry
/// is nonnegative.
fn normalize_sign<T: Real>(a: &mut DMatrix<T>, j: usize, partner: Option<&mut DMatrix<T>>) {
    let col = a.column(j);
    let mut best = T::zero();
    let mut best_abs = T::zero();
    for &v in col.iter() {
        let av = v.abs();
        if av > best_abs {
            best_abs = av;
            best = v;
        }
    }
    if best < T::zero() {
        a.column_mut(j).neg_mut();
        if let Some(p) = partner {
            p.column_mut(j).neg_mut();
        }
    }
}

/// Full SVD of an n×p matrix.
pub fn svd_full<T: Real>(x: &DMatrix<T>) -> Result<SvdFactors<T>> {
    let thin = svd_thin(x)?;
    Ok(SvdFactors { u: complete_basis(&thin.u), d: thin.d, v: complete_basis(&thin.v) })
}

/// Sorted, sign-normalized SVD whose `u` and `v` keep only `min(n, p)`
/// columns. Everything except `null_space` and `nrows`/`ncols` agrees with
/// [`svd_full`]; use it when a tall or wide basis would be wasteful.
pub fn svd_thin<T: Real>(x: &DMatrix<T>) -> Result<SvdFactors<T>> {
    check_finite(x)?;
    let (n, p) = x.shape();
    let m = n.min(p);
    if m == 0 {
        return Ok(SvdFactors { u: DMatrix::identity(n, n), d: DVector::zeros(0), v: DMatrix::identity(p, p) });
    }
    // nalgebra's bidiagonal SVD can return wrong vectors when singular values
    // are exactly zero, so the decomposition itself runs in faer
    let a = faer::Mat::<f64>::from_fn(n, p, |i, j| x[(i, j)].as_f64());
    let svd = a.thin_svd().map_err(|e| RidgeError::Degenerate(format!("SVD did not converge: {e:?}")))?;
    let (s, u_thin, v_thin) = (svd.S().column_vector(), svd.U(), svd.V());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let d = DVector::from_iterator(m, order.iter().map(|&k| T::lit(s[k].max(0.0))));
    let mut u = DMatrix::from_fn(n, m, |i, j| T::lit(u_thin[(i, order[j])]));
    let mut v = DMatrix::from_fn(p, m, |i, j| T::lit(v_thin[(i, order[j])]));
    for j in 0..m {
        normalize_sign(&mut v, j, Some(&mut u));
    }
    Ok(SvdFactors { u, d, v })
}

/// Thin QR with nonnegative diagonal on `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors<T: Real> {
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
}

pub fn qr<T: Real>(x: &DMatrix<T>) -> Result<QrFactors<T>> {
    check_finite(x)?;
    let f = x.clone().qr();
    let mut q = f.q();
    let mut r = f.r();
    for k in 0..r.nrows().min(r.ncols()) {
        if r[(k, k)] < T::zero() {
            r.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
    Ok(QrFactors { q, r })
}

/// Upper-triangular `r` with `k = rᵀ r`, plus the diagonal jitter that was
/// needed (zero when the plain factorization succeeded).
#[derive(Debug, Clone)]
pub struct CholeskyFactor<T: Real> {
    pub r: DMatrix<T>,
    pub jitter: T,
}

impl<T: Real> CholeskyFactor<T> {
    /// Solves `r x = b`.
    pub fn solve_upper(&self, b: &DVector<T>) -> Option<DVector<T>> {
        self.r.solve_upper_triangular(b)
    }
}

/// Cholesky of a symmetric matrix. On failure, adds `1e-10 * trace(k) / n` to
/// the diagonal once and retries.
pub fn cholesky_jittered<T: Real>(k: &DMatrix<T>) -> Result<CholeskyFactor<T>> {
    check_finite(k)?;
    if let Some(c) = k.clone().cholesky() {
        return Ok(CholeskyFactor { r: c.l().transpose(), jitter: T::zero() });
    }
    let n = k.nrows().max(1);
    let jitter = T::lit(1e-10) * k.trace() / T::from_count(n);
    if jitter > T::zero() {
        let mut kj = k.clone();
        for i in 0..k.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = kj.cholesky() {
            return Ok(CholeskyFactor { r: c.l().transpose(), jitter });
        }
    }
    Err(RidgeError::rank("Cholesky factorization failed after jitter"))
}

/// Solves the symmetric positive definite system `a x = b`, or `None` when
/// `a` is not numerically positive definite.
pub fn spd_solve<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Option<DMatrix<T>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Cholesky that additionally rejects numerically singular matrices: the
/// squared pivot ratio `min L_ii² / max L_ii²` must exceed `1e-13`.
pub fn spd_factor_strict<T: Real>(a: &DMatrix<T>) -> Option<nalgebra::Cholesky<T, nalgebra::Dyn>> {
    let c = a.clone().cholesky()?;
    let l = c.l_dirty();
    let (mut lo, mut hi) = (T::max_value().unwrap(), T::zero());
    for i in 0..l.nrows() {
        let v = l[(i, i)] * l[(i, i)];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo > T::lit(1e-13) * hi).then_some(c)
}

pub fn spd_solve_vec<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Option<DVector<T>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Moore-Penrose inverse with the rank and cutoff that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverse<T: Real> {
    pub matrix: DMatrix<T>,
    pub source_rank: usize,
    pub tolerance: T,
}

/// Pseudo-inverse; singular values at or below `tol * d1` are dropped.
pub fn pinv<T: Real>(x: &DMatrix<T>, tol: T) -> Result<PseudoInverse<T>> {
    let f = svd_thin(x)?;
    let rank = f.rank_with(tol);
    let (n, p) = x.shape();
    let mut matrix = DMatrix::zeros(p, n);
    for j in 0..rank {
        let inv = T::one() / f.d[j];
        matrix += (f.v.column(j) * f.u.column(j).transpose()) * inv;
    }
    Ok(PseudoInverse { matrix, source_rank: rank, tolerance: tol })
}

/// Pseudo-inverse at the default cutoff `RANK_TOL`.
pub fn pinv_default<T: Real>(x: &DMatrix<T>) -> Result<PseudoInverse<T>> {
    pinv(x, T::lit(RANK_TOL))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Real>(a: &DMatrix<T>) -> T {
    let sym = (a + a.transpose()) * T::lit(0.5);
    sym.symmetric_eigenvalues().iter().copied().fold(T::max_value().unwrap(), |m, v| m.min(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::normal_matrix;

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn assert_svd_contract(x: &DMatrix<f64>) {
        let f = svd_full(x).unwrap();
        let (n, p) = x.shape();
        assert_eq!(f.u.shape(), (n, n));
        assert_eq!(f.v.shape(), (p, p));
        assert!((f.u.transpose() * &f.u - DMatrix::identity(n, n)).norm() < 1e-10);
        assert!((f.v.transpose() * &f.v - DMatrix::identity(p, p)).norm() < 1e-10);
        for w in f.d.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(f.d.iter().all(|&s| s >= 0.0));
        if x.norm() > 0.0 {
            assert!(rel_frob(&f.reconstruct(), x) < 1e-10);
        } else {
            assert!(f.reconstruct().norm() == 0.0);
        }
    }

    #[test]
    fn identity_and_diagonal() {
        let f = svd_full(&DMatrix::<f64>::identity(2, 2)).unwrap();
        assert_eq!(f.d.as_slice(), &[1.0, 1.0]);
        assert!((f.u.abs() - DMatrix::identity(2, 2)).norm() < 1e-14);
        let f = svd_full(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0f64, 3.0]))).unwrap();
        assert!((f.d[0] - 3.0).abs() < 1e-14 && (f.d[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn contract_on_corpus() {
        for (i, &(n, p)) in [(5, 3), (3, 5), (1, 4), (4, 1), (6, 6), (20, 50)].iter().enumerate() {
            assert_svd_contract(&normal_matrix::<f64>(i as u64, 0, n, p));
        }
        // rank deficient: duplicated columns
        let base = normal_matrix::<f64>(9, 0, 7, 2);
        let dup = DMatrix::from_fn(7, 4, |i, j| base[(i, j % 2)]);
        assert_svd_contract(&dup);
        assert_eq!(svd_full(&dup).unwrap().rank(), 2);
        assert_svd_contract(&DMatrix::zeros(3, 4));
    }

    #[test]
    fn sign_convention_is_stable() {
        let x = normal_matrix::<f64>(3, 0, 6, 4);
        let a = svd_full(&x).unwrap();
        let b = svd_full(&(-&x)).unwrap();
        // -x flips u only; v keeps its normalized orientation
        assert!((a.v - &b.v).norm() < 1e-10);
        for j in 0..4 {
            let col = b.v.column(j);
            let top = col.iter().copied().fold(0.0f64, |m: f64, v: f64| if v.abs() > m.abs() { v } else { m });
            assert!(top >= 0.0);
        }
    }

    #[test]
    fn zero_matrix() {
        let f = svd_full(&DMatrix::<f64>::zeros(3, 2)).unwrap();
        assert_eq!(f.rank(), 0);
        let pi = pinv_default(&DMatrix::<f64>::zeros(3, 2)).unwrap();
        assert_eq!(pi.matrix, DMatrix::zeros(2, 3));
    }

    #[test]
    fn non_finite_rejected() {
        let mut x = DMatrix::<f64>::identity(2, 2);
        x[(0, 1)] = f64::NAN;
        assert!(matches!(svd_full(&x), Err(RidgeError::InvalidInput(_))));
    }

    fn assert_moore_penrose(a: &DMatrix<f64>, g: &DMatrix<f64>) {
        let scale = a.norm().max(1.0) * g.norm().max(1.0);
        assert!((a * g * a - a).norm() < 1e-8 * scale);
        assert!((g * a * g - g).norm() < 1e-8 * scale);
        let ag = a * g;
        let ga = g * a;
        assert!((&ag - ag.transpose()).norm() < 1e-8 * scale);
        assert!((&ga - ga.transpose()).norm() < 1e-8 * scale);
    }

    #[test]
    fn pinv_examples() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((pinv_default(&i3).unwrap().matrix - &i3).norm() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let pi = pinv_default(&d).unwrap();
        assert_eq!(pi.source_rank, 1);
        assert!((pi.matrix - DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0]))).norm() < 1e-15);
    }

    #[test]
    fn pinv_doubly_centered_kernel() {
        let x = normal_matrix::<f64>(11, 0, 4, 6);
        let c = DMatrix::<f64>::identity(4, 4) - DMatrix::from_element(4, 4, 0.25);
        let kt = &c * (&x * x.transpose()) * &c;
        let pi = pinv_default(&kt).unwrap();
        assert!(pi.source_rank <= 3);
        assert!((&kt * &pi.matrix * &kt - &kt).norm() < 1e-8);
        assert_moore_penrose(&kt, &pi.matrix);
    }

    #[test]
    fn pinv_involution_full_rank() {
        for seed in 0..5 {
            let x = normal_matrix::<f64>(seed, 0, 5, 3);
            let g = pinv_default(&x).unwrap().matrix;
            assert_moore_penrose(&x, &g);
            let back = pinv_default(&g).unwrap().matrix;
            assert!((back - &x).norm() < 1e-8);
        }
    }

    #[test]
    fn qr_and_cholesky() {
        let x = normal_matrix::<f64>(2, 0, 8, 3);
        let f = qr(&x).unwrap();
        assert!((f.q.transpose() * &f.q - DMatrix::identity(3, 3)).norm() < 1e-10);
        assert!(rel_frob(&(&f.q * &f.r), &x) < 1e-10);
        assert!((0..3).all(|k| f.r[(k, k)] >= 0.0));
        // R from QR of Xᵀ is the Cholesky factor of XXᵀ
        let w = normal_matrix::<f64>(4, 0, 3, 9);
        let qf = qr(&w.transpose()).unwrap();
        let ch = cholesky_jittered(&(&w * w.transpose())).unwrap();
        assert!((qf.r - ch.r).norm() < 1e-10);
    }

    #[test]
    fn cholesky_jitter_then_error() {
        // borderline PSD: rank 1 after jitter becomes PD
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let k = &v * v.transpose();
        let c = cholesky_jittered(&k).unwrap();
        assert!(c.jitter > 0.0);
        let neg = -DMatrix::<f64>::identity(2, 2);
        assert!(matches!(cholesky_jittered(&neg), Err(RidgeError::RankDeficient(_))));
    }

    #[test]
    fn single_precision_instantiation() {
        let x = DMatrix::<f32>::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let f = svd_full(&x).unwrap();
        assert!((f.d[0] - 3.0).abs() < 1e-5);
    }
}
