//! Spatial DiD regression
//!
//! ```text
//! y[i,t] = rho * sum_j S[i,j] y[j,t-1] + b0 + b1 T[i] + b2 Post[t]
//!        + delta T[i] Post[t] + gamma' c[i,t] + e[i,t]
//! ```
//!
//! `rho` is estimated first by two-stage least squares; the remaining
//! coefficients then come from OLS of `y - rho_hat * lag` on the exogenous
//! columns. Those point estimates coincide with the 2SLS second stage (the
//! exogenous columns lie in the instrument span), so the reported standard
//! errors are the joint classical 2SLS ones.

use nalgebra::{DMatrix, DVector};

use super::panel::Panel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::spatial::SpatialMatrix;

pub const LAG_COLUMN: &str = "spatial_lag";
const EXOG_COLUMNS: [&str; 4] = ["intercept", "treated", "post", "treated_x_post"];

/// Which optional blocks of the regression are present. Turning either off
/// reproduces the ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignOptions {
    pub spatial: bool,
    pub factors: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            spatial: true,
            factors: true,
        }
    }
}

/// Regression design: one row per `(region, t)` with `t >= 1`, region-major.
///
/// Columns: `[spatial_lag (t-1), intercept, treated, post, treated_x_post,
/// gamma_<cov>...]`; the lag and covariate blocks disappear when disabled.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub targets: DVector<f64>,
    pub columns: Vec<String>,
    /// `(region, time)` of each row.
    pub rows: Vec<(usize, usize)>,
    pub options: DesignOptions,
    pub covariate_names: Vec<String>,
}

impl Design {
    pub fn lag_column(&self) -> Option<usize> {
        self.options.spatial.then_some(0)
    }

    /// First exogenous column.
    pub fn exog_start(&self) -> usize {
        usize::from(self.options.spatial)
    }

    pub fn exog(&self) -> DMatrix<f64> {
        let s = self.exog_start();
        self.x.columns(s, self.x.ncols() - s).into_owned()
    }

    pub fn subset(&self, keep: &[usize]) -> Design {
        let x = DMatrix::from_fn(keep.len(), self.x.ncols(), |r, c| self.x[(keep[r], c)]);
        let targets = DVector::from_fn(keep.len(), |r, _| self.targets[keep[r]]);
        Design {
            x,
            targets,
            columns: self.columns.clone(),
            rows: keep.iter().map(|&r| self.rows[r]).collect(),
            options: self.options,
            covariate_names: self.covariate_names.clone(),
        }
    }
}

pub fn build_design_matrix(
    panel: &Panel,
    s: &SpatialMatrix,
    options: DesignOptions,
) -> Result<Design> {
    let n = panel.n_regions();
    let t_len = panel.n_times();
    if t_len < 2 {
        return Err(Error::InsufficientData(format!(
            "the lagged regression needs at least 2 time steps, got {t_len}"
        )));
    }
    if s.n() != n {
        return Err(Error::DimensionMismatch {
            what: "spatial matrix size vs panel regions",
            expected: n,
            actual: s.n(),
        });
    }
    let lag = s.spatial_lag(panel.y())?;
    let covariate_names: Vec<String> = if options.factors {
        panel.covariate_names().to_vec()
    } else {
        Vec::new()
    };

    let mut columns = Vec::new();
    if options.spatial {
        columns.push(LAG_COLUMN.to_string());
    }
    columns.extend(EXOG_COLUMNS.iter().map(|c| c.to_string()));
    columns.extend(covariate_names.iter().map(|c| format!("gamma_{c}")));

    let n_rows = n * (t_len - 1);
    let mut x = DMatrix::zeros(n_rows, columns.len());
    let mut targets = DVector::zeros(n_rows);
    let mut rows = Vec::with_capacity(n_rows);
    let mut r = 0;
    for i in 0..n {
        let treated = if panel.treated()[i] { 1.0 } else { 0.0 };
        for t in 1..t_len {
            let post = if panel.post()[t] { 1.0 } else { 0.0 };
            let mut c = 0;
            if options.spatial {
                x[(r, c)] = lag[(i, t - 1)];
                c += 1;
            }
            for v in [1.0, treated, post, treated * post] {
                x[(r, c)] = v;
                c += 1;
            }
            if options.factors {
                for cov in panel.covariates() {
                    x[(r, c)] = cov[(i, t)];
                    c += 1;
                }
            }
            targets[r] = panel.y()[(i, t)];
            rows.push((i, t));
            r += 1;
        }
    }
    Ok(Design {
        x,
        targets,
        columns,
        rows,
        options,
        covariate_names,
    })
}

/// Instruments for the spatial-lag regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InstrumentSet {
    /// `S c[., t-1]` for every covariate plus `S^2 y[., t-2]`.
    #[default]
    SpatialLags,
    /// Treat the lag as exogenous (it instruments itself); 2SLS then reduces
    /// to OLS.
    Exogenous,
}

/// First-step output: `rho_hat` plus the joint 2SLS covariance of
/// `[rho, exogenous coefficients...]`.
#[derive(Debug, Clone)]
pub struct RhoEstimate {
    pub rho: f64,
    pub std_error: f64,
    /// Design rows used (rows with `t >= 2` when lagged instruments are used).
    pub sample: Vec<usize>,
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub residual_variance: f64,
}

/// Two-stage least squares for the spatial-lag coefficient.
pub fn estimate_rho_iv(
    design: &Design,
    s: &SpatialMatrix,
    panel: &Panel,
    instruments: InstrumentSet,
) -> Result<RhoEstimate> {
    let lag_col = design.lag_column().ok_or_else(|| {
        Error::InvalidInput("design has no spatial-lag column to instrument".into())
    })?;
    let (sample, z_extra, z_names): (Vec<usize>, DMatrix<f64>, Vec<String>) = match instruments {
        InstrumentSet::Exogenous => {
            let sample: Vec<usize> = (0..design.rows.len()).collect();
            let z = design.x.columns(lag_col, 1).into_owned();
            (sample, z, vec![LAG_COLUMN.to_string()])
        }
        InstrumentSet::SpatialLags => {
            let sample: Vec<usize> = design
                .rows
                .iter()
                .enumerate()
                .filter(|(_, (_, t))| *t >= 2)
                .map(|(k, _)| k)
                .collect();
            if sample.is_empty() {
                return Err(Error::InsufficientData(
                    "lagged instruments need at least 3 time steps".into(),
                ));
            }
            let mut blocks = Vec::new();
            let mut names = Vec::new();
            if design.options.factors {
                for (name, cov) in panel.covariate_names().iter().zip(panel.covariates()) {
                    blocks.push(s.spatial_lag(cov)?);
                    names.push(format!("S*{name}[t-1]"));
                }
            }
            let s2y = s.squared() * panel.y();
            let mut z = DMatrix::zeros(sample.len(), blocks.len() + 1);
            for (r, &k) in sample.iter().enumerate() {
                let (i, t) = design.rows[k];
                for (b, block) in blocks.iter().enumerate() {
                    z[(r, b)] = block[(i, t - 1)];
                }
                z[(r, blocks.len())] = s2y[(i, t - 2)];
            }
            names.push("S^2*y[t-2]".to_string());
            (sample, z, names)
        }
    };

    let sub = design.subset(&sample);
    let exog = sub.exog();
    let n_exog = exog.ncols();
    let n_obs = sample.len();

    // first stage: lag ~ [exog | instruments]
    let mut z = DMatrix::zeros(n_obs, n_exog + z_extra.ncols());
    z.columns_mut(0, n_exog).copy_from(&exog);
    z.columns_mut(n_exog, z_extra.ncols()).copy_from(&z_extra);
    let z_names: Vec<String> = sub.columns[sub.exog_start()..]
        .iter()
        .cloned()
        .chain(z_names)
        .collect();
    let lag = sub.x.column(lag_col).into_owned();
    let first = linalg::ols(&z, &lag).map_err(|cols| Error::RankDeficient {
        columns: cols.into_iter().map(|c| z_names[c].clone()).collect(),
    })?;
    let fitted_lag = &lag - &first.residuals;

    // second stage: y ~ [fitted lag | exog]
    let mut xhat = DMatrix::zeros(n_obs, n_exog + 1);
    xhat.column_mut(0).copy_from(&fitted_lag);
    xhat.columns_mut(1, n_exog).copy_from(&exog);
    let second = linalg::ols(&xhat, &sub.targets).map_err(|cols| Error::Collinear {
        columns: cols.into_iter().map(|c| sub.columns[c].clone()).collect(),
    })?;
    let coefficients = second.coef;
    let rho = coefficients[0];
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::NonStationary { rho });
    }

    // structural residuals use the observed lag
    let structural = &sub.targets - &sub.x * &coefficients;
    let dof = n_obs.saturating_sub(coefficients.len());
    if dof == 0 {
        return Err(Error::InsufficientData(format!(
            "{n_obs} observations for {} coefficients",
            coefficients.len()
        )));
    }
    let residual_variance = structural.norm_squared() / dof as f64;
    let covariance = second.xtx_inv * residual_variance;
    Ok(RhoEstimate {
        rho,
        std_error: covariance[(0, 0)].max(0.0).sqrt(),
        sample,
        coefficients,
        covariance,
        residual_variance,
    })
}

/// Fitted regression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DidEstimate {
    pub rho: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
    pub gamma: Vec<f64>,
    pub covariate_names: Vec<String>,
    pub residual_variance: f64,
    pub std_errors: StdErrors,
    pub n_obs: usize,
}

/// `rho` has no standard error when it was fixed rather than estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct StdErrors {
    pub rho: Option<f64>,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
    pub gamma: Vec<f64>,
}

/// One row of the machine-readable coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

impl DidEstimate {
    pub fn coefficients(&self) -> Vec<Coefficient> {
        let mut out = vec![
            Coefficient {
                name: "rho".into(),
                estimate: self.rho,
                std_error: self.std_errors.rho,
            },
            Coefficient {
                name: "beta0".into(),
                estimate: self.beta0,
                std_error: Some(self.std_errors.beta0),
            },
            Coefficient {
                name: "beta1".into(),
                estimate: self.beta1,
                std_error: Some(self.std_errors.beta1),
            },
            Coefficient {
                name: "beta2".into(),
                estimate: self.beta2,
                std_error: Some(self.std_errors.beta2),
            },
            Coefficient {
                name: "delta".into(),
                estimate: self.delta,
                std_error: Some(self.std_errors.delta),
            },
        ];
        for ((name, g), se) in self
            .covariate_names
            .iter()
            .zip(&self.gamma)
            .zip(&self.std_errors.gamma)
        {
            out.push(Coefficient {
                name: format!("gamma_{name}"),
                estimate: *g,
                std_error: Some(*se),
            });
        }
        out
    }

    /// Inverse of [`DidEstimate::coefficients`]; `residual_variance` and
    /// `n_obs` are not part of the table and come back as given.
    pub fn from_coefficients(
        coefs: &[Coefficient],
        residual_variance: f64,
        n_obs: usize,
    ) -> Result<Self> {
        let get = |name: &str| {
            coefs
                .iter()
                .find(|c| c.name == name)
                .ok_or_else(|| Error::InvalidInput(format!("coefficient '{name}' missing")))
        };
        let se = |c: &Coefficient| {
            c.std_error
                .ok_or_else(|| Error::InvalidInput(format!("coefficient '{}' has no std_error", c.name)))
        };
        let rho = get("rho")?;
        let (b0, b1, b2, d) = (get("beta0")?, get("beta1")?, get("beta2")?, get("delta")?);
        let gammas: Vec<&Coefficient> = coefs
            .iter()
            .filter(|c| c.name.starts_with("gamma_"))
            .collect();
        Ok(Self {
            rho: rho.estimate,
            beta0: b0.estimate,
            beta1: b1.estimate,
            beta2: b2.estimate,
            delta: d.estimate,
            gamma: gammas.iter().map(|c| c.estimate).collect(),
            covariate_names: gammas
                .iter()
                .map(|c| c.name["gamma_".len()..].to_string())
                .collect(),
            residual_variance,
            std_errors: StdErrors {
                rho: rho.std_error,
                beta0: se(b0)?,
                beta1: se(b1)?,
                beta2: se(b2)?,
                delta: se(d)?,
                gamma: gammas.iter().map(|c| se(c)).collect::<Result<_>>()?,
            },
            n_obs,
        })
    }
}

/// OLS of `targets - rho_hat * lag` on the exogenous columns, with classical
/// homoskedastic standard errors conditional on `rho_hat`.
pub fn estimate_ols_given_rho(design: &Design, rho_hat: f64) -> Result<DidEstimate> {
    let mut lhs = design.targets.clone();
    match design.lag_column() {
        Some(c) => lhs.axpy(-rho_hat, &design.x.column(c), 1.0),
        None if rho_hat != 0.0 => {
            return Err(Error::InvalidInput(format!(
                "rho_hat = {rho_hat} given for a design without a spatial-lag column"
            )))
        }
        None => {}
    }
    let exog = design.exog();
    let names = &design.columns[design.exog_start()..];
    let fit = linalg::ols(&exog, &lhs).map_err(|cols| Error::Collinear {
        columns: cols.into_iter().map(|c| names[c].clone()).collect(),
    })?;
    let n_obs = exog.nrows();
    let dof = n_obs.saturating_sub(exog.ncols());
    if dof == 0 {
        return Err(Error::InsufficientData(format!(
            "{n_obs} observations for {} coefficients",
            exog.ncols()
        )));
    }
    let residual_variance = fit.residuals.norm_squared() / dof as f64;
    let se: Vec<f64> = (0..exog.ncols())
        .map(|k| (fit.xtx_inv[(k, k)] * residual_variance).max(0.0).sqrt())
        .collect();
    Ok(assemble(
        rho_hat,
        None,
        fit.coef.as_slice(),
        &se,
        design.covariate_names.clone(),
        residual_variance,
        n_obs,
    ))
}

fn assemble(
    rho: f64,
    rho_se: Option<f64>,
    exog_coef: &[f64],
    exog_se: &[f64],
    covariate_names: Vec<String>,
    residual_variance: f64,
    n_obs: usize,
) -> DidEstimate {
    DidEstimate {
        rho,
        beta0: exog_coef[0],
        beta1: exog_coef[1],
        beta2: exog_coef[2],
        delta: exog_coef[3],
        gamma: exog_coef[4..].to_vec(),
        covariate_names,
        residual_variance,
        std_errors: StdErrors {
            rho: rho_se,
            beta0: exog_se[0],
            beta1: exog_se[1],
            beta2: exog_se[2],
            delta: exog_se[3],
            gamma: exog_se[4..].to_vec(),
        },
        n_obs,
    }
}

/// Full two-step fit. Without the spatial block this is plain OLS with
/// `rho = 0`.
pub fn estimate(
    panel: &Panel,
    s: &SpatialMatrix,
    options: DesignOptions,
    instruments: InstrumentSet,
) -> Result<DidEstimate> {
    let design = build_design_matrix(panel, s, options)?;
    if !options.spatial {
        return estimate_ols_given_rho(&design, 0.0);
    }
    let rho = estimate_rho_iv(&design, s, panel, instruments)?;
    let sub = design.subset(&rho.sample);
    let mut est = estimate_ols_given_rho(&sub, rho.rho)?;
    let k = rho.coefficients.len();
    let joint_se: Vec<f64> = (1..k)
        .map(|j| rho.covariance[(j, j)].max(0.0).sqrt())
        .collect();
    // identical point estimates; carry the joint uncertainty instead of the
    // conditional one
    let exog: Vec<f64> = [est.beta0, est.beta1, est.beta2, est.delta]
        .into_iter()
        .chain(est.gamma.iter().copied())
        .collect();
    est = assemble(
        rho.rho,
        Some(rho.std_error),
        &exog,
        &joint_se,
        est.covariate_names,
        rho.residual_variance,
        est.n_obs,
    );
    Ok(est)
}
