//! Spatial difference-in-differences: estimation, causal adjustment and
//! interpretable reporting.

mod adjust;
mod estimate;
mod panel;
mod report;
mod transform;

pub use adjust::{adjust, build_adjusted_input, causal_adjust, AdjustedPanel};
pub use estimate::{
    build_design_matrix, estimate, estimate_ols_given_rho, estimate_rho_iv, Coefficient, Design,
    DesignOptions, DidEstimate, InstrumentSet, RhoEstimate, StdErrors, LAG_COLUMN,
};
pub use panel::{post_from_onset, Panel, CANONICAL_COVARIATES};
pub use report::{report_parameters, Intervention, ParameterReport, Spillover};
pub use transform::TargetTransform;
