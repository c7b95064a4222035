//! Output families: link functions, negative log-likelihoods with their
//! derivatives, and sampling.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal, StudentT};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Added to `softplus` so the scale never reaches zero.
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Student-t degrees of freedom are `NU_OFFSET + softplus(raw)`.
pub const NU_OFFSET: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Laplace,
    StudentT,
}

impl Family {
    /// Raw head outputs per step.
    pub fn arity(self) -> usize {
        match self {
            Family::Gaussian | Family::Laplace => 2,
            Family::StudentT => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
            Family::StudentT => "student_t",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "laplace" => Ok(Family::Laplace),
            "student_t" | "studentt" | "student-t" => Ok(Family::StudentT),
            other => Err(Error::Config(format!(
                "unknown distribution '{other}' (expected gaussian, laplace or student_t)"
            ))),
        }
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionParams {
    pub family: Family,
    pub mu: f64,
    pub sigma: f64,
    /// Only meaningful for Student-t.
    pub nu: f64,
}

impl DistributionParams {
    /// Applies the link functions to raw head outputs.
    pub fn from_raw(family: Family, raw: &[f64]) -> Self {
        let nu = match family {
            Family::StudentT => NU_OFFSET + softplus(raw[2]),
            _ => f64::INFINITY,
        };
        Self {
            family,
            mu: raw[0],
            sigma: softplus(raw[1]) + SIGMA_FLOOR,
            nu,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.mu.is_finite()
            && self.sigma > 0.0
            && self.sigma.is_finite()
            && (self.family != Family::StudentT || self.nu >= NU_OFFSET)
    }

    pub fn nll(&self, y: f64) -> f64 {
        debug_assert!(self.is_valid(), "invalid distribution parameters {self:?}");
        let (mu, sigma) = (self.mu, self.sigma);
        match self.family {
            Family::Laplace => (2.0 * sigma).ln() + (y - mu).abs() / sigma,
            Family::Gaussian => {
                let r = (y - mu) / sigma;
                0.5 * (2.0 * PI).ln() + sigma.ln() + 0.5 * r * r
            }
            Family::StudentT => {
                let nu = self.nu;
                let r = (y - mu) / sigma;
                -ln_gamma((nu + 1.0) / 2.0) + ln_gamma(nu / 2.0) + 0.5 * (PI * nu).ln()
                    + sigma.ln()
                    + (nu + 1.0) / 2.0 * (r * r / nu).ln_1p()
            }
        }
    }

    /// `(d nll / d mu, d nll / d sigma, d nll / d nu)`; the last entry is 0
    /// for families without `nu`.
    pub fn nll_grad(&self, y: f64) -> [f64; 3] {
        let (mu, sigma) = (self.mu, self.sigma);
        match self.family {
            Family::Laplace => {
                let e = y - mu;
                let sign = if e > 0.0 {
                    1.0
                } else if e < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                [-sign / sigma, 1.0 / sigma - e.abs() / (sigma * sigma), 0.0]
            }
            Family::Gaussian => {
                let e = y - mu;
                let s2 = sigma * sigma;
                [-e / s2, 1.0 / sigma - e * e / (s2 * sigma), 0.0]
            }
            Family::StudentT => {
                let nu = self.nu;
                let r = (y - mu) / sigma;
                let r2 = r * r;
                let denom = nu + r2;
                let d_mu = -(nu + 1.0) * r / (sigma * denom);
                let d_sigma = 1.0 / sigma - (nu + 1.0) * r2 / (sigma * denom);
                let d_nu = 0.5 * (digamma(nu / 2.0) - digamma((nu + 1.0) / 2.0))
                    + 0.5 / nu
                    + 0.5 * (r2 / nu).ln_1p()
                    - (nu + 1.0) * r2 / (2.0 * nu * denom);
                [d_mu, d_sigma, d_nu]
            }
        }
    }

    /// Gradient of the nll with respect to the raw head outputs.
    pub fn nll_grad_raw(&self, y: f64, raw: &[f64]) -> [f64; 3] {
        let [g_mu, g_sigma, g_nu] = self.nll_grad(y);
        let mut out = [g_mu, g_sigma * sigmoid(raw[1]), 0.0];
        if self.family == Family::StudentT {
            out[2] = g_nu * sigmoid(raw[2]);
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.mu + self.sigma * z
            }
            Family::Laplace => {
                let u: f64 = Open01.sample(rng);
                let u = u - 0.5;
                self.mu - self.sigma * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Family::StudentT => {
                let t = StudentT::new(self.nu).expect("nu > 2 by construction");
                self.mu + self.sigma * t.sample(rng)
            }
        }
    }
}

/// Negative log-likelihood of `y` under `params`.
pub fn nll(params: &DistributionParams, y: f64) -> f64 {
    params.nll(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(family: Family, mu: f64, sigma: f64, nu: f64) -> DistributionParams {
        DistributionParams {
            family,
            mu,
            sigma,
            nu,
        }
    }

    #[test]
    fn gaussian_at_mode() {
        let v = p(Family::Gaussian, 0.3, 1.0, 0.0).nll(0.3);
        assert!((v - 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn laplace_at_mode_with_unit_density() {
        assert!(p(Family::Laplace, 2.0, 0.5, 0.0).nll(2.0).abs() < 1e-15);
    }

    /// `ln Gamma` by recurrence up to x >= 20, then the Stirling series.
    fn ln_gamma_stirling(mut x: f64) -> f64 {
        let mut shift = 0.0;
        while x < 20.0 {
            shift -= x.ln();
            x += 1.0;
        }
        let x2 = x * x;
        shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x * x2)
            + 1.0 / (1260.0 * x2 * x2 * x)
            - 1.0 / (1680.0 * x2 * x2 * x2 * x)
    }

    #[test]
    fn student_t_matches_series_oracle() {
        let (nu, mu, sigma, y) = (5.0, 0.0, 1.0, 1.3);
        let r: f64 = (y - mu) / sigma;
        let oracle = -(ln_gamma_stirling((nu + 1.0) / 2.0) - ln_gamma_stirling(nu / 2.0)
            - 0.5 * (PI * nu).ln()
            - sigma.ln()
            - (nu + 1.0) / 2.0 * (1.0 + r * r / nu).ln());
        // frozen from a 30-digit evaluation
        assert!((oracle - 1.842_147_474_172_834).abs() < 1e-12);
        let v = p(Family::StudentT, mu, sigma, nu).nll(y);
        assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
    }

    #[test]
    fn links_keep_parameters_valid() {
        for raw in [-800.0, -30.0, 0.0, 5.0, 800.0] {
            let d = DistributionParams::from_raw(Family::StudentT, &[raw, raw, raw]);
            assert!(d.sigma > 0.0 && d.nu >= 2.0 && d.is_valid(), "{d:?}");
        }
        let z = DistributionParams::from_raw(Family::Gaussian, &[0.0, 0.0]);
        assert_eq!(z.mu, 0.0);
        assert!((z.sigma - (std::f64::consts::LN_2 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn analytic_grads_match_central_differences() {
        let h = 1e-6;
        for family in [Family::Gaussian, Family::Laplace, Family::StudentT] {
            for &(raw, y) in &[([0.3, -0.2, 1.1], 1.7), ([-1.0, 0.8, -0.4], -2.5), ([2.0, -1.5, 3.0], 1.2)] {
                let a = DistributionParams::from_raw(family, &raw);
                let g = a.nll_grad_raw(y, &raw);
                for k in 0..family.arity() {
                    let mut up = raw;
                    let mut dn = raw;
                    up[k] += h;
                    dn[k] -= h;
                    let fd = (DistributionParams::from_raw(family, &up).nll(y)
                        - DistributionParams::from_raw(family, &dn).nll(y))
                        / (2.0 * h);
                    assert!((fd - g[k]).abs() < 1e-6 * fd.abs().max(1.0), "{family} k={k}: {fd} vs {}", g[k]);
                }
            }
        }
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Student_T".parse::<Family>().unwrap(), Family::StudentT);
        assert!("cauchy".parse::<Family>().is_err());
    }
}
