//! Run configuration: `key = value` files plus `key=value` overrides.
//!
//! Every key has a default, listed by [`RunConfig::to_key_values`]. Lines
//! starting with `#` are comments. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::probmodel::ModelConfig;
use crate::synth::{GeneratorSpec, NoiseFamily};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `region_id,lat,lon,treated`; defaults to `<out>/regions.csv`.
    pub regions: Option<PathBuf>,
    /// `region_id,date,y,<covariates...>`; defaults to `<out>/panel.csv`.
    pub panel: Option<PathBuf>,
    pub out: PathBuf,
    /// Covariate columns to use; `None` takes every non-key column.
    pub covariates: Option<Vec<String>>,
    /// First post-intervention date (inclusive).
    pub post_onset_date: Option<NaiveDate>,
    pub alpha: f64,
    pub no_spatial: bool,
    pub no_factors: bool,
    pub log1p: bool,
    pub standardize: bool,
    /// Hold out the last `horizon` steps for evaluation.
    pub holdout: bool,
    /// Run the generator first and use its panel.
    pub simulate: bool,
    pub model_name: String,
    pub model: ModelConfig,
    pub generator: GeneratorSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            regions: None,
            panel: None,
            out: PathBuf::from("out"),
            covariates: None,
            post_onset_date: None,
            alpha: 1.0,
            no_spatial: false,
            no_factors: false,
            log1p: false,
            standardize: true,
            holdout: true,
            simulate: false,
            model_name: "stcast".into(),
            model: ModelConfig::default(),
            generator: GeneratorSpec::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{v}' for '{key}'"))),
    }
}

fn parse_date(key: &str, v: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(v, "%Y-%m-%d")
        .map_err(|_| Error::Config(format!("invalid date '{v}' for '{key}' (expected YYYY-MM-DD)")))
}

fn list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected 'key = value'", path.display(), k + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), k + 1)))?;
        }
        Ok(())
    }

    /// Applies `key=value` strings in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let m = &mut self.model;
        let g = &mut self.generator;
        match key {
            "regions" => self.regions = opt_path(v),
            "panel" => self.panel = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            "covariates" => self.covariates = (!v.is_empty()).then(|| list(v)),
            "post_onset_date" => {
                self.post_onset_date = if v.is_empty() { None } else { Some(parse_date(key, v)?) }
            }
            "alpha" => {
                self.alpha = parse(key, v)?;
                g.alpha = self.alpha;
            }
            "no_spatial" => self.no_spatial = parse_bool(key, v)?,
            "no_factors" => self.no_factors = parse_bool(key, v)?,
            "log1p" => self.log1p = parse_bool(key, v)?,
            "standardize" => self.standardize = parse_bool(key, v)?,
            "holdout" => self.holdout = parse_bool(key, v)?,
            "simulate" => self.simulate = parse_bool(key, v)?,
            "model_name" => self.model_name = v.to_string(),
            "seed" => {
                m.seed = parse(key, v)?;
                g.seed = m.seed;
            }
            "hidden_size" => m.hidden_size = parse(key, v)?,
            "num_layers" => m.num_layers = parse(key, v)?,
            "distribution" => m.distribution = v.parse()?,
            "context_len" => m.context_len = parse(key, v)?,
            "horizon" => m.horizon = parse(key, v)?,
            "learning_rate" => m.learning_rate = parse(key, v)?,
            "epochs" => m.epochs = parse(key, v)?,
            "grad_clip" => m.grad_clip = parse(key, v)?,
            "num_samples" => m.num_samples = parse(key, v)?,
            "batch_size" => m.batch_size = parse(key, v)?,
            "sim.n_regions" => g.n_regions = parse(key, v)?,
            "sim.t_steps" => g.t_steps = parse(key, v)?,
            "sim.rho" => g.rho = parse(key, v)?,
            "sim.beta0" => g.beta0 = parse(key, v)?,
            "sim.beta1" => g.beta1 = parse(key, v)?,
            "sim.beta2" => g.beta2 = parse(key, v)?,
            "sim.delta" => g.delta = parse(key, v)?,
            "sim.gamma" => {
                g.gamma = list(v)
                    .iter()
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "sim.treated_fraction" => g.treated_fraction = parse(key, v)?,
            "sim.post_onset_index" => g.post_onset_index = parse(key, v)?,
            "sim.noise_sigma" => g.noise_sigma = parse(key, v)?,
            "sim.noise_dof" => {
                g.noise = if v.is_empty() {
                    NoiseFamily::Gaussian
                } else {
                    NoiseFamily::StudentT { dof: parse(key, v)? }
                }
            }
            "sim.covariate_persistence" => g.covariates.persistence = parse(key, v)?,
            "sim.start_date" => g.start_date = parse_date(key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.model_name.is_empty() || self.model_name.contains(',') {
            return Err(Error::Config("model_name must be non-empty without commas".into()));
        }
        if self.simulate {
            self.generator
                .validate()
                .map_err(|e| Error::Config(format!("generator: {e}")))?;
        }
        Ok(())
    }

    pub fn regions_path(&self) -> PathBuf {
        self.regions.clone().unwrap_or_else(|| self.out.join("regions.csv"))
    }

    pub fn panel_path(&self) -> PathBuf {
        self.panel.clone().unwrap_or_else(|| self.out.join("panel.csv"))
    }

    /// Every key with its current value, in a form [`RunConfig::set`]
    /// accepts back.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        let g = &self.generator;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        vec![
            ("regions", path(&self.regions)),
            ("panel", path(&self.panel)),
            ("out", self.out.display().to_string()),
            ("covariates", self.covariates.as_ref().map(|c| c.join(",")).unwrap_or_default()),
            ("post_onset_date", self.post_onset_date.map(|d| d.to_string()).unwrap_or_default()),
            ("alpha", format!("{:?}", self.alpha)),
            ("no_spatial", self.no_spatial.to_string()),
            ("no_factors", self.no_factors.to_string()),
            ("log1p", self.log1p.to_string()),
            ("standardize", self.standardize.to_string()),
            ("holdout", self.holdout.to_string()),
            ("simulate", self.simulate.to_string()),
            ("model_name", self.model_name.clone()),
            ("seed", m.seed.to_string()),
            ("hidden_size", m.hidden_size.to_string()),
            ("num_layers", m.num_layers.to_string()),
            ("distribution", m.distribution.to_string()),
            ("context_len", m.context_len.to_string()),
            ("horizon", m.horizon.to_string()),
            ("learning_rate", format!("{:?}", m.learning_rate)),
            ("epochs", m.epochs.to_string()),
            ("grad_clip", format!("{:?}", m.grad_clip)),
            ("num_samples", m.num_samples.to_string()),
            ("batch_size", m.batch_size.to_string()),
            ("sim.n_regions", g.n_regions.to_string()),
            ("sim.t_steps", g.t_steps.to_string()),
            ("sim.rho", format!("{:?}", g.rho)),
            ("sim.beta0", format!("{:?}", g.beta0)),
            ("sim.beta1", format!("{:?}", g.beta1)),
            ("sim.beta2", format!("{:?}", g.beta2)),
            ("sim.delta", format!("{:?}", g.delta)),
            ("sim.gamma", g.gamma.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")),
            ("sim.treated_fraction", format!("{:?}", g.treated_fraction)),
            ("sim.post_onset_index", g.post_onset_index.to_string()),
            ("sim.noise_sigma", format!("{:?}", g.noise_sigma)),
            (
                "sim.noise_dof",
                match g.noise {
                    NoiseFamily::Gaussian => String::new(),
                    NoiseFamily::StudentT { dof } => format!("{dof:?}"),
                },
            ),
            ("sim.covariate_persistence", format!("{:?}", g.covariates.persistence)),
            ("sim.start_date", g.start_date.to_string()),
        ]
    }

    pub fn to_file_string(&self) -> String {
        self.to_key_values()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::Family;

    #[test]
    fn every_key_round_trips() {
        let mut a = RunConfig::default();
        a.apply_overrides(&[
            "distribution=student_t",
            "seed=17",
            "covariates=R,V",
            "post_onset_date=2020-05-30",
            "sim.gamma=1.5,-2",
            "sim.noise_dof=5",
            "regions=data/r.csv",
        ])
        .unwrap();
        assert_eq!(a.model.distribution, Family::StudentT);
        assert_eq!(a.generator.seed, 17);
        let mut b = RunConfig::default();
        for (k, v) in a.to_key_values() {
            b.set(k, &v).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_and_malformed_keys_fail() {
        let mut c = RunConfig::default();
        assert!(matches!(c.set("hiden_size", "3"), Err(Error::Config(_))));
        assert!(matches!(c.set("epochs", "-1"), Err(Error::Config(_))));
        assert!(matches!(c.set("log1p", "maybe"), Err(Error::Config(_))));
        assert!(c.apply_overrides(&["epochs"]).is_err());
    }

    #[test]
    fn file_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        fs::write(&p, "# demo\nepochs = 3\n\nhorizon=2\ncontext_len = 10\n").unwrap();
        let c = RunConfig::from_file(&p).unwrap();
        assert_eq!((c.model.epochs, c.model.horizon, c.model.context_len), (3, 2, 10));
        fs::write(&p, "epochs 3\n").unwrap();
        let e = RunConfig::from_file(&p).unwrap_err().to_string();
        assert!(e.contains("run.conf:1"), "{e}");
    }
}
