//! Small dense least-squares helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

/// Relative residual norm below which a column counts as linearly dependent
/// on the columns before it.
pub const RANK_TOL: f64 = 1e-9;

/// Diagonal jitter added when the Cholesky factorisation of `X'X` fails.
pub const RIDGE: f64 = 1e-10;

/// Indices of columns that are (numerically) in the span of the preceding
/// columns, found by modified Gram-Schmidt with re-orthogonalisation.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(x.ncols());
    let mut deficient = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            deficient.push(j);
            continue;
        }
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let rem = v.norm();
        if rem <= RANK_TOL * norm {
            deficient.push(j);
        } else {
            basis.push(v / rem);
        }
    }
    deficient
}

/// Result of an ordinary least-squares solve.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    /// `(X'X)^-1`.
    pub xtx_inv: DMatrix<f64>,
    pub residuals: DVector<f64>,
    /// Set when the ridge fallback was needed.
    pub ridged: bool,
}

/// Solves the normal equations `X'X b = X'y` by Cholesky. Returns the indices
/// of dependent columns as the error when `X` is rank deficient.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, Vec<usize>> {
    let dependent = dependent_columns(x);
    if !dependent.is_empty() {
        return Err(dependent);
    }
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let (chol, ridged) = match xtx.clone().cholesky() {
        Some(c) => (c, false),
        None => {
            log::warn!(
                "normal equations not positive definite; retrying with ridge {RIDGE:e}"
            );
            let k = xtx.nrows();
            match (xtx + DMatrix::identity(k, k) * RIDGE).cholesky() {
                Some(c) => (c, true),
                None => return Err((0..x.ncols()).collect()),
            }
        }
    };
    let coef = chol.solve(&xty);
    let xtx_inv = chol.inverse();
    let residuals = y - x * &coef;
    Ok(OlsFit {
        coef,
        xtx_inv,
        residuals,
        ridged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_duplicate_and_zero_columns() {
        let x = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 1.0, 0.0, 2.0, //
                1.0, 2.0, 0.0, 2.0, //
                1.0, 3.0, 0.0, 2.0, //
                1.0, 4.0, 0.0, 2.0,
            ],
        );
        assert_eq!(dependent_columns(&x), vec![2, 3]);
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i + 1) as f64).powi(j as i32));
        let beta = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let y = &x * &beta;
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coef - beta).amax() < 1e-9);
        assert!(fit.residuals.amax() < 1e-9);
        assert!(!fit.ridged);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let x = DMatrix::from_fn(50, 4, |i, j| ((i * (j + 2)) as f64 * 0.37).cos());
        let y = DVector::from_fn(50, |i, _| (i as f64 * 0.11).sin() * 3.0);
        let fit = ols(&x, &y).unwrap();
        assert!((x.transpose() * fit.residuals).amax() < 1e-10);
    }
}
