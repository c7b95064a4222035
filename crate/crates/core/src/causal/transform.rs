use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Per-region target preprocessing: optional `log1p`, then standardisation
/// with statistics taken from the conditioning range.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTransform {
    pub log1p: bool,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl TargetTransform {
    pub fn identity(n: usize) -> Self {
        Self {
            log1p: false,
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    /// Fits on `y` (N x T). With `standardize == false` only `log1p` applies.
    pub fn fit(y: &DMatrix<f64>, log1p: bool, standardize: bool) -> Result<Self> {
        let n = y.nrows();
        let mut out = Self::identity(n);
        out.log1p = log1p;
        if !standardize {
            return Ok(out);
        }
        let pre = out.log_part(y)?;
        let t = pre.ncols() as f64;
        for i in 0..n {
            let row = pre.row(i);
            let mean = row.sum() / t;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
            let sd = var.sqrt();
            out.mean[i] = mean;
            // flat series keep unit scale
            out.std[i] = if sd > 1e-12 { sd } else { 1.0 };
        }
        Ok(out)
    }

    pub fn n_regions(&self) -> usize {
        self.mean.len()
    }

    fn log_part(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if !self.log1p {
            return Ok(y.clone());
        }
        if let Some(v) = y.iter().find(|v| **v <= -1.0) {
            return Err(Error::InvalidInput(format!(
                "log1p transform needs targets > -1, found {v}; disable log1p for signed data"
            )));
        }
        Ok(y.map(f64::ln_1p))
    }

    pub fn forward(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.nrows() != self.n_regions() {
            return Err(Error::DimensionMismatch {
                what: "transform regions",
                expected: self.n_regions(),
                actual: y.nrows(),
            });
        }
        let mut out = self.log_part(y)?;
        for i in 0..out.nrows() {
            for t in 0..out.ncols() {
                out[(i, t)] = (out[(i, t)] - self.mean[i]) / self.std[i];
            }
        }
        Ok(out)
    }

    pub fn inverse_value(&self, region: usize, v: f64) -> f64 {
        let raw = v * self.std[region] + self.mean[region];
        if self.log1p {
            raw.exp_m1()
        } else {
            raw
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let y = DMatrix::from_row_slice(2, 4, &[1.0, 10.0, 100.0, 1000.0, 5.0, 5.0, 5.0, 5.0]);
        let tr = TargetTransform::fit(&y, true, true).unwrap();
        let w = tr.forward(&y).unwrap();
        assert!(w.row(0).sum().abs() < 1e-12);
        assert_eq!(tr.std[1], 1.0);
        for i in 0..2 {
            for t in 0..4 {
                let back = tr.inverse_value(i, w[(i, t)]);
                assert!((back - y[(i, t)]).abs() < 1e-9 * y[(i, t)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn log1p_rejects_below_minus_one() {
        let y = DMatrix::from_row_slice(1, 2, &[-2.0, 1.0]);
        assert!(TargetTransform::fit(&y, true, true).is_err());
        assert!(TargetTransform::fit(&y, false, true).is_ok());
    }
}
