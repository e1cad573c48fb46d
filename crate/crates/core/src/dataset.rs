use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RidgeError};
use crate::Real;

/// Design matrix and response, optionally centered and standardized.
///
/// When `column_means` is present, `x` and `y` hold the centered working
/// copies and the model carries an unpenalized intercept recovered after the
/// fit. `column_scales` (present only with centering) records the column
/// norms divided out by standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Real> {
    pub x: DMatrix<T>,
    pub y: DVector<T>,
    pub column_means: Option<DVector<T>>,
    pub y_mean: Option<T>,
    pub column_scales: Option<DVector<T>>,
}

impl<T: Real> Dataset<T> {
    /// Raw dataset without intercept.
    pub fn new(x: DMatrix<T>, y: DVector<T>) -> Result<Self> {
        validate(&x, &y)?;
        Ok(Self { x, y, column_means: None, y_mean: None, column_scales: None })
    }

    /// Centers `x` and `y`; the fit will carry an intercept.
    pub fn centered(x: DMatrix<T>, y: DVector<T>) -> Result<Self> {
        validate(&x, &y)?;
        let n = T::from_count(x.nrows());
        let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
        let y_mean = y.sum() / n;
        let mut xc = x;
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-means[j]);
        }
        let yc = y.add_scalar(-y_mean);
        Ok(Self { x: xc, y: yc, column_means: Some(means), y_mean: Some(y_mean), column_scales: None })
    }

    /// Centers, then scales every column to unit Euclidean norm. Constant
    /// columns are left at zero.
    pub fn standardized(x: DMatrix<T>, y: DVector<T>) -> Result<Self> {
        let mut data = Self::centered(x, y)?;
        let scales = DVector::from_iterator(
            data.p(),
            data.x.column_iter().map(|c| {
                let s = c.norm();
                if s > T::zero() {
                    s
                } else {
                    T::one()
                }
            }),
        );
        for (j, mut col) in data.x.column_iter_mut().enumerate() {
            col /= scales[j];
        }
        data.column_scales = Some(scales);
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn has_intercept(&self) -> bool {
        self.column_means.is_some()
    }

    pub fn is_standardized(&self) -> bool {
        self.column_scales.is_some()
    }

    /// Original-scale design rows.
    pub fn raw_x(&self) -> DMatrix<T> {
        let mut x = self.x.clone();
        if let Some(s) = &self.column_scales {
            for (j, mut col) in x.column_iter_mut().enumerate() {
                col *= s[j];
            }
        }
        if let Some(m) = &self.column_means {
            for (j, mut col) in x.column_iter_mut().enumerate() {
                col.add_scalar_mut(m[j]);
            }
        }
        x
    }

    pub fn raw_y(&self) -> DVector<T> {
        match self.y_mean {
            Some(m) => self.y.add_scalar(m),
            None => self.y.clone(),
        }
    }

    /// Maps original-scale rows into the working coordinates of `x`.
    pub fn transform(&self, raw: &DMatrix<T>) -> DMatrix<T> {
        let mut out = raw.clone();
        if let Some(m) = &self.column_means {
            for (j, mut col) in out.column_iter_mut().enumerate() {
                col.add_scalar_mut(-m[j]);
            }
        }
        if let Some(s) = &self.column_scales {
            for (j, mut col) in out.column_iter_mut().enumerate() {
                col /= s[j];
            }
        }
        out
    }

    /// Rebuilds a dataset from a subset of rows with the same preprocessing,
    /// recomputing means and scales on the subset.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let raw = self.raw_x();
        let y = self.raw_y();
        let xs = raw.select_rows(rows);
        let ys = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
        self.rebuild(xs, ys)
    }

    /// Same preprocessing applied to fresh raw data.
    pub fn rebuild(&self, x: DMatrix<T>, y: DVector<T>) -> Result<Self> {
        match (self.has_intercept(), self.is_standardized()) {
            (_, true) => Self::standardized(x, y),
            (true, false) => Self::centered(x, y),
            (false, false) => Self::new(x, y),
        }
    }

    /// Intercept `y_mean - column_meansᵀ β` in working coordinates, or `None`
    /// without centering.
    pub fn intercept_for(&self, beta: &DVector<T>) -> Option<T> {
        let means = self.column_means.as_ref()?;
        let y_mean = self.y_mean?;
        let slope = match &self.column_scales {
            Some(s) => beta.component_div(s),
            None => beta.clone(),
        };
        Some(y_mean - means.dot(&slope))
    }

    /// Checks the centering invariant: each working column sums to zero
    /// within `1e-9 * n` (scaled by the column magnitude).
    pub fn centering_holds(&self) -> bool {
        if !self.has_intercept() {
            return false;
        }
        let tol = T::lit(1e-9) * T::from_count(self.n());
        self.x.column_iter().all(|c| c.sum().abs() <= tol * c.amax().max(T::one()))
    }
}

fn validate<T: Real>(x: &DMatrix<T>, y: &DVector<T>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(RidgeError::invalid("dataset needs at least one row"));
    }
    if x.nrows() != y.len() {
        return Err(RidgeError::invalid(format!("design has {} rows but response has {} entries", x.nrows(), y.len())));
    }
    if !x.iter().chain(y.iter()).all(|v| v.finite()) {
        return Err(RidgeError::invalid("dataset has non-finite entries"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::normal_matrix;

    #[test]
    fn centering_invariant() {
        let x = normal_matrix::<f64>(1, 0, 12, 4).add_scalar(3.0);
        let y = DVector::from_fn(12, |i, _| i as f64);
        let d = Dataset::centered(x.clone(), y.clone()).unwrap();
        assert!(d.centering_holds());
        assert!((d.raw_x() - &x).norm() < 1e-12);
        assert!((d.raw_y() - &y).norm() < 1e-12);
        let s = Dataset::standardized(x.clone(), y).unwrap();
        for c in s.x.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        assert!((s.raw_x() - &x).norm() < 1e-10);
        assert!((s.transform(&x) - &s.x).norm() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let x = DMatrix::<f64>::zeros(3, 2);
        assert!(Dataset::new(x.clone(), DVector::zeros(2)).is_err());
        assert!(Dataset::new(DMatrix::<f64>::zeros(0, 2), DVector::zeros(0)).is_err());
        let mut y = DVector::zeros(3);
        y[1] = f64::INFINITY;
        assert!(Dataset::new(x, y).is_err());
    }
}
