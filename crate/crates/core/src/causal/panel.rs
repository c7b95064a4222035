use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Canonical covariate ordering: reproduction number, mitigation stringency,
/// vaccination share, ICU patients.
pub const CANONICAL_COVARIATES: [&str; 4] = ["R", "M", "V", "I"];

/// Aligned regional panel: targets `y` (N x T), `D` covariate matrices of the
/// same shape, a per-region treatment flag and a global post-period step.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    region_ids: Vec<String>,
    times: Vec<NaiveDate>,
    y: DMatrix<f64>,
    covariates: Vec<DMatrix<f64>>,
    covariate_names: Vec<String>,
    treated: Vec<bool>,
    post: Vec<bool>,
}

impl Panel {
    pub fn new(
        region_ids: Vec<String>,
        times: Vec<NaiveDate>,
        y: DMatrix<f64>,
        covariate_names: Vec<String>,
        covariates: Vec<DMatrix<f64>>,
        treated: Vec<bool>,
        post: Vec<bool>,
    ) -> Result<Self> {
        let n = region_ids.len();
        let t = times.len();
        if n == 0 || t == 0 {
            return Err(Error::InsufficientData(format!(
                "panel needs at least one region and one time step (got {n} x {t})"
            )));
        }
        check_shape("y", &y, n, t)?;
        if covariates.len() != covariate_names.len() {
            return Err(Error::DimensionMismatch {
                what: "covariate names vs covariate matrices",
                expected: covariate_names.len(),
                actual: covariates.len(),
            });
        }
        for c in &covariates {
            check_shape("covariate", c, n, t)?;
        }
        if treated.len() != n {
            return Err(Error::DimensionMismatch {
                what: "treatment flags",
                expected: n,
                actual: treated.len(),
            });
        }
        if post.len() != t {
            return Err(Error::DimensionMismatch {
                what: "post-period flags",
                expected: t,
                actual: post.len(),
            });
        }
        check_times(&times)?;
        if let Some(k) = post.windows(2).position(|w| w[0] && !w[1]) {
            return Err(Error::InvalidInput(format!(
                "post indicator must be a single 0..0 1..1 step; it falls back to 0 at index {}",
                k + 1
            )));
        }
        if let Some(((i, t), _)) = y.iter().enumerate().map(|(k, v)| ((k % n, k / n), v)).find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "target for region '{}' at index {t} is not finite",
                region_ids[i]
            )));
        }
        for (name, c) in covariate_names.iter().zip(&covariates) {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "covariate '{name}' has non-finite values"
                )));
            }
        }
        Ok(Self {
            region_ids,
            times,
            y,
            covariates,
            covariate_names,
            treated,
            post,
        })
    }

    pub fn n_regions(&self) -> usize {
        self.region_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn times(&self) -> &[NaiveDate] {
        &self.times
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn covariates(&self) -> &[DMatrix<f64>] {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    pub fn post(&self) -> &[bool] {
        &self.post
    }

    /// `T_i * Post_t` as 0/1.
    pub fn treated_post(&self, i: usize, t: usize) -> f64 {
        if self.treated[i] && self.post[t] {
            1.0
        } else {
            0.0
        }
    }

    /// Spacing between consecutive dates in days (1 for a single date).
    pub fn step_days(&self) -> i64 {
        match self.times.as_slice() {
            [a, b, ..] => (*b - *a).num_days(),
            _ => 1,
        }
    }

    /// Same panel with the target matrix replaced.
    pub fn with_y(&self, y: DMatrix<f64>) -> Result<Self> {
        check_shape("y", &y, self.n_regions(), self.n_times())?;
        Ok(Self { y, ..self.clone() })
    }

    /// Keeps the first `len` time steps.
    pub fn truncate(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.n_times() {
            return Err(Error::InsufficientData(format!(
                "cannot keep {len} of {} time steps",
                self.n_times()
            )));
        }
        let n = self.n_regions();
        Ok(Self {
            region_ids: self.region_ids.clone(),
            times: self.times[..len].to_vec(),
            y: self.y.columns(0, len).into_owned(),
            covariates: self.covariates.iter().map(|c| c.columns(0, len).into_owned()).collect(),
            covariate_names: self.covariate_names.clone(),
            treated: self.treated[..n].to_vec(),
            post: self.post[..len].to_vec(),
        })
    }

    /// Drops every covariate.
    pub fn without_covariates(&self) -> Self {
        Self {
            covariates: Vec::new(),
            covariate_names: Vec::new(),
            ..self.clone()
        }
    }
}

/// `Post_t = 1` for every date on or after `onset`.
pub fn post_from_onset(times: &[NaiveDate], onset: NaiveDate) -> Vec<bool> {
    times.iter().map(|d| *d >= onset).collect()
}

fn check_shape(what: &'static str, m: &DMatrix<f64>, n: usize, t: usize) -> Result<()> {
    if m.nrows() != n {
        return Err(Error::DimensionMismatch {
            what,
            expected: n,
            actual: m.nrows(),
        });
    }
    if m.ncols() != t {
        return Err(Error::DimensionMismatch {
            what,
            expected: t,
            actual: m.ncols(),
        });
    }
    Ok(())
}

fn check_times(times: &[NaiveDate]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let step = times[1] - times[0];
    if step.num_days() <= 0 {
        return Err(Error::InvalidInput(format!(
            "times must be strictly increasing ({} then {})",
            times[0], times[1]
        )));
    }
    for w in times.windows(2) {
        if w[1] - w[0] != step {
            return Err(Error::InvalidInput(format!(
                "times must be evenly spaced: {} -> {} differs from the {}-day step",
                w[0],
                w[1],
                step.num_days()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn days(n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        (0..n).map(|k| d0 + chrono::Duration::days(k as i64)).collect()
    }

    fn panel(post: Vec<bool>) -> Result<Panel> {
        Panel::new(
            vec!["a".into(), "b".into()],
            days(4),
            DMatrix::zeros(2, 4),
            vec![],
            vec![],
            vec![true, false],
            post,
        )
    }

    #[test]
    fn post_must_be_a_step() {
        assert!(panel(vec![false, false, true, true]).is_ok());
        assert!(panel(vec![false, true, false, true]).is_err());
    }

    #[test]
    fn uneven_times_rejected() {
        let mut t = days(4);
        t[3] = t[3] + chrono::Duration::days(1);
        let p = Panel::new(
            vec!["a".into()],
            t,
            DMatrix::zeros(1, 4),
            vec![],
            vec![],
            vec![false],
            vec![false; 4],
        );
        assert!(p.is_err());
    }

    #[test]
    fn nan_rejected() {
        let mut y = DMatrix::zeros(2, 4);
        y[(1, 2)] = f64::NAN;
        let p = Panel::new(
            vec!["a".into(), "b".into()],
            days(4),
            y,
            vec![],
            vec![],
            vec![true, false],
            vec![false; 4],
        );
        assert!(p.is_err());
    }

    #[test]
    fn truncate_keeps_prefix() {
        let p = panel(vec![false, false, true, true]).unwrap();
        let q = p.truncate(3).unwrap();
        assert_eq!(q.n_times(), 3);
        assert_eq!(q.post(), &[false, false, true]);
    }
}
