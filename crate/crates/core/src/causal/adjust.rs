use nalgebra::DMatrix;

use super::estimate::DidEstimate;
use super::panel::Panel;
use crate::error::{Error, Result};
use crate::spatial::SpatialMatrix;

/// Counterfactual targets and the spatially adjusted model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedPanel {
    pub y_tilde: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

/// `y_tilde[i,t] = y[i,t] - delta_hat * T[i] * Post[t]`.
pub fn causal_adjust(panel: &Panel, est: &DidEstimate) -> DMatrix<f64> {
    let mut out = panel.y().clone();
    for i in 0..panel.n_regions() {
        for t in 0..panel.n_times() {
            if panel.treated_post(i, t) != 0.0 {
                out[(i, t)] -= est.delta;
            }
        }
    }
    out
}

/// `z[i,t] = y_tilde[i,t] + rho_hat * sum_j S[i,j] y_tilde[j,t]`.
///
/// The lag here is contemporaneous while the estimation lag is `t - 1`; both
/// follow the model equations as written.
pub fn build_adjusted_input(
    y_tilde: &DMatrix<f64>,
    s: &SpatialMatrix,
    rho_hat: f64,
) -> Result<DMatrix<f64>> {
    let lag = s.spatial_lag(y_tilde)?;
    if rho_hat == 0.0 {
        return Ok(y_tilde.clone());
    }
    Ok(y_tilde + lag * rho_hat)
}

pub fn adjust(panel: &Panel, est: &DidEstimate, s: &SpatialMatrix) -> Result<AdjustedPanel> {
    if s.n() != panel.n_regions() {
        return Err(Error::DimensionMismatch {
            what: "spatial matrix size vs panel regions",
            expected: panel.n_regions(),
            actual: s.n(),
        });
    }
    let y_tilde = causal_adjust(panel, est);
    let z = build_adjusted_input(&y_tilde, s, est.rho)?;
    Ok(AdjustedPanel { y_tilde, z })
}
