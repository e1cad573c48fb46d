//! Natural cubic spline bases with knots at training quantiles.
//!
//! The construction follows the familiar `ns()` recipe: cubic B-splines on
//! the augmented knot sequence, the first one dropped, then projected onto
//! the null space of the second-derivative constraints at both boundary
//! knots. Outside the boundary knots the basis continues linearly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RidgeError};
use crate::Real;

const ORDER: usize = 4;

/// A fitted natural-spline basis for one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasisSpec<T: Real> {
    pub d: usize,
    pub interior_knots: Vec<T>,
    pub boundary_knots: (T, T),
    /// Maps the `d + 2` unconstrained B-splines onto the `d` natural ones.
    projection: DMatrix<T>,
    /// Training-sample column means subtracted on evaluation.
    pub centers: DVector<T>,
}

/// Type-7 sample quantile of sorted data.
fn quantile<T: Real>(sorted: &[T], prob: f64) -> T {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Values (or derivatives of order `deriv`) of every B-spline of `order`
/// on knot vector `t` at `x`, which must lie in `[t_0, t_last]`.
fn bspline<T: Real>(t: &[T], order: usize, deriv: usize, x: T) -> Vec<T> {
    let count = t.len() - order;
    if order == 1 {
        let mut out = vec![T::zero(); count];
        if deriv > 0 {
            return out;
        }
        let last = *t.last().unwrap();
        // the right end belongs to the last nonempty interval
        let idx = if x >= last {
            (0..count).rev().find(|&i| t[i] < t[i + 1])
        } else {
            (0..count).find(|&i| t[i] <= x && x < t[i + 1])
        };
        if let Some(i) = idx {
            out[i] = T::one();
        }
        return out;
    }
    let k1 = T::from_count(order - 1);
    let ratio = |num: T, den: T| if den > T::zero() { num / den } else { T::zero() };
    let lower = bspline(t, order - 1, deriv.saturating_sub(1), x);
    (0..count)
        .map(|i| {
            let left_span = t[i + order - 1] - t[i];
            let right_span = t[i + order] - t[i + 1];
            if deriv == 0 {
                ratio((x - t[i]) * lower[i], left_span) + ratio((t[i + order] - x) * lower[i + 1], right_span)
            } else {
                k1 * (ratio(lower[i], left_span) - ratio(lower[i + 1], right_span))
            }
        })
        .collect()
}

impl<T: Real> SplineBasisSpec<T> {
    fn knot_vector(&self) -> Vec<T> {
        let (a, b) = self.boundary_knots;
        let mut t = vec![a; ORDER];
        t.extend_from_slice(&self.interior_knots);
        t.extend(std::iter::repeat_n(b, ORDER));
        t
    }

    /// Projected, uncentered basis row at `x` (or its derivative).
    fn raw_row(&self, t: &[T], deriv: usize, x: T) -> DVector<T> {
        let full = bspline(t, ORDER, deriv, x);
        let dropped = DVector::from_iterator(full.len() - 1, full.into_iter().skip(1));
        self.projection.tr_mul(&dropped)
    }

    fn natural_row(&self, t: &[T], x: T) -> DVector<T> {
        let (a, b) = self.boundary_knots;
        if x < a {
            self.raw_row(t, 0, a) + self.raw_row(t, 1, a) * (x - a)
        } else if x > b {
            self.raw_row(t, 0, b) + self.raw_row(t, 1, b) * (x - b)
        } else {
            self.raw_row(t, 0, x)
        }
    }

    /// Basis matrix (rows = `values`, `d` columns), centered with the
    /// training means.
    pub fn evaluate(&self, values: &[T]) -> DMatrix<T> {
        let t = self.knot_vector();
        let mut out = DMatrix::zeros(values.len(), self.d);
        for (i, &x) in values.iter().enumerate() {
            let row = self.natural_row(&t, x) - &self.centers;
            out.row_mut(i).tr_copy_from(&row);
        }
        out
    }

    pub fn knots(&self) -> Vec<T> {
        let (a, b) = self.boundary_knots;
        let mut k = vec![a];
        k.extend_from_slice(&self.interior_knots);
        k.push(b);
        k
    }
}

/// Natural cubic spline basis of dimension `d` (intercept excluded) with
/// `d − 1` interior knots at the `k/d` quantiles and boundary knots at the
/// sample extremes.
pub fn build_basis<T: Real>(values: &[T], d: usize) -> Result<SplineBasisSpec<T>> {
    if d == 0 {
        return Err(RidgeError::invalid("spline dimension must be at least one"));
    }
    if values.iter().any(|v| !v.finite()) {
        return Err(RidgeError::invalid("spline inputs must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < d + 1 {
        return Err(RidgeError::invalid(format!(
            "{} distinct values cannot support a spline basis of dimension {d}",
            distinct.len()
        )));
    }
    let a = sorted[0];
    let b = *sorted.last().unwrap();
    let interior: Vec<T> = (1..d).map(|k| quantile(&sorted, k as f64 / d as f64)).collect();
    let mut all = vec![a];
    all.extend_from_slice(&interior);
    all.push(b);
    if all.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(RidgeError::invalid("quantile knots are not strictly increasing; too many tied values"));
    }

    let mut spec = SplineBasisSpec {
        d,
        interior_knots: interior,
        boundary_knots: (a, b),
        projection: DMatrix::identity(d + 2, d + 2),
        centers: DVector::zeros(d + 2),
    };
    let t = spec.knot_vector();
    // second-derivative constraints at both ends, columns = dropped B-splines
    let mut cons = DMatrix::zeros(d + 2, 2);
    for (c, x) in [a, b].into_iter().enumerate() {
        let dd = bspline(&t, ORDER, 2, x);
        for j in 0..d + 2 {
            cons[(j, c)] = dd[j + 1];
        }
    }
    // full Householder Q; its trailing columns span the constraint null space
    let mut full = DMatrix::identity(d + 2, d + 2);
    cons.qr().q_tr_mul(&mut full);
    spec.projection = full.transpose().columns(2, d).into_owned();
    spec.centers = DVector::zeros(d);
    let raw = spec.evaluate(values);
    spec.centers = DVector::from_iterator(d, raw.column_iter().map(|c| c.mean()));
    Ok(spec)
}

/// Per-variable bases for the columns of `x`, all of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveBasis<T: Real> {
    pub specs: Vec<SplineBasisSpec<T>>,
}

impl<T: Real> AdditiveBasis<T> {
    pub fn build(x: &DMatrix<T>, d: usize) -> Result<Self> {
        let specs = x.column_iter().map(|c| build_basis(c.as_slice(), d)).collect::<Result<Vec<_>>>()?;
        Ok(Self { specs })
    }

    /// `[h_1(x_1) | … | h_p(x_p)]`, n × (p·d).
    pub fn evaluate(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let d = self.specs.first().map_or(0, |s| s.d);
        let mut out = DMatrix::zeros(x.nrows(), d * self.specs.len());
        for (j, spec) in self.specs.iter().enumerate() {
            let col: Vec<T> = x.column(j).iter().copied().collect();
            out.columns_mut(j * d, d).copy_from(&spec.evaluate(&col));
        }
        out
    }

    pub fn width(&self) -> usize {
        self.specs.iter().map(|s| s.d).sum()
    }
}
