use std::fmt;

use super::estimate::DidEstimate;

/// `rho` above this is read as strong positive spatial correlation.
pub const STRONG_SPILLOVER: f64 = 0.3;
/// `delta` below this is read as an effective (outcome-reducing) intervention.
pub const EFFECTIVE_DELTA: f64 = -0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spillover {
    Strong,
    Weak,
    NoneOrNegative,
}

impl Spillover {
    pub fn classify(rho: f64) -> Self {
        if rho > STRONG_SPILLOVER {
            Spillover::Strong
        } else if rho > 0.0 {
            Spillover::Weak
        } else {
            Spillover::NoneOrNegative
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Spillover::Strong => "strong",
            Spillover::Weak => "weak",
            Spillover::NoneOrNegative => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intervention {
    Effective,
    Limited,
    Adverse,
}

impl Intervention {
    pub fn classify(delta: f64) -> Self {
        if delta < EFFECTIVE_DELTA {
            Intervention::Effective
        } else if delta > -EFFECTIVE_DELTA {
            Intervention::Adverse
        } else {
            Intervention::Limited
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Intervention::Effective => "effective",
            Intervention::Limited => "limited effectiveness",
            Intervention::Adverse => "adverse",
        }
    }
}

/// Interpretable summary of a fit: treatment effect, spillover strength and
/// covariate effects, each with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterReport {
    pub estimate: DidEstimate,
    pub spillover: Spillover,
    pub intervention: Intervention,
    /// Covariate names ordered by decreasing `|gamma|`.
    pub covariate_importance: Vec<String>,
}

pub fn report_parameters(est: &DidEstimate) -> ParameterReport {
    let mut order: Vec<usize> = (0..est.gamma.len()).collect();
    order.sort_by(|&a, &b| est.gamma[b].abs().total_cmp(&est.gamma[a].abs()));
    ParameterReport {
        estimate: est.clone(),
        spillover: Spillover::classify(est.rho),
        intervention: Intervention::classify(est.delta),
        covariate_importance: order
            .into_iter()
            .map(|k| est.covariate_names[k].clone())
            .collect(),
    }
}

impl ParameterReport {
    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let e = &self.estimate;
        let mut kv = Vec::new();
        let mut push = |k: String, v: String| kv.push((k, v));
        push("rho".into(), format!("{:?}", e.rho));
        push(
            "rho_std_error".into(),
            e.std_errors.rho.map(|v| format!("{v:?}")).unwrap_or_default(),
        );
        push("spillover".into(), self.spillover.label().into());
        push("delta".into(), format!("{:?}", e.delta));
        push("delta_std_error".into(), format!("{:?}", e.std_errors.delta));
        push("intervention".into(), self.intervention.label().into());
        for ((name, g), se) in e.covariate_names.iter().zip(&e.gamma).zip(&e.std_errors.gamma) {
            push(format!("gamma_{name}"), format!("{g:?}"));
            push(format!("gamma_{name}_std_error"), format!("{se:?}"));
            push(
                format!("gamma_{name}_sign"),
                if *g >= 0.0 { "positive" } else { "negative" }.into(),
            );
        }
        push("covariate_importance".into(), self.covariate_importance.join(","));
        push("beta0".into(), format!("{:?}", e.beta0));
        push("beta1".into(), format!("{:?}", e.beta1));
        push("beta2".into(), format!("{:?}", e.beta2));
        push("residual_variance".into(), format!("{:?}", e.residual_variance));
        push("n_obs".into(), e.n_obs.to_string());
        kv
    }
}

impl fmt::Display for ParameterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.estimate;
        writeln!(f, "Spatial DiD estimate ({} observations)", e.n_obs)?;
        match e.std_errors.rho {
            Some(se) => writeln!(f, "  rho   = {:>10.4} (se {:.4})  spillover: {}", e.rho, se, self.spillover.label())?,
            None => writeln!(f, "  rho   = {:>10.4} (fixed)      spillover: {}", e.rho, self.spillover.label())?,
        }
        writeln!(
            f,
            "  delta = {:>10.4} (se {:.4})  intervention: {}",
            e.delta,
            e.std_errors.delta,
            self.intervention.label()
        )?;
        for ((name, g), se) in e.covariate_names.iter().zip(&e.gamma).zip(&e.std_errors.gamma) {
            writeln!(f, "  gamma[{name}] = {g:>10.4} (se {se:.4})")?;
        }
        write!(f, "  residual variance = {:.6}", e.residual_variance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(Spillover::classify(0.35), Spillover::Strong);
        assert_eq!(Spillover::classify(0.3), Spillover::Weak);
        assert_eq!(Spillover::classify(-0.2), Spillover::NoneOrNegative);
        assert_eq!(Intervention::classify(-0.15), Intervention::Effective);
        assert_eq!(Intervention::classify(0.0), Intervention::Limited);
        assert_eq!(Intervention::classify(0.5), Intervention::Adverse);
    }
}
