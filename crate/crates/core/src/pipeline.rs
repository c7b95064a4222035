//! Stage runner. Each stage reads its inputs from the output directory (or
//! the configured data files) and writes its artifacts back there, so stages
//! can run one at a time or chained.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::causal::{self, DesignOptions, InstrumentSet, Panel, TargetTransform};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, AdjustedTable};
use crate::metrics::{self, ScoreReport};
use crate::probmodel::{self, checkpoint, ForecastModel, SpatialCoupling};
use crate::spatial::{RegionSet, SpatialMatrix};
use crate::synth;

pub const REGIONS: &str = "regions.csv";
pub const PANEL: &str = "panel.csv";
pub const GROUND_TRUTH: &str = "ground_truth.csv";
pub const RUN_CONFIG: &str = "run.conf";
pub const SPATIAL_MATRIX: &str = "spatial_matrix.csv";
pub const DID_ESTIMATE: &str = "did_estimate.csv";
pub const DID_REPORT: &str = "did_report.txt";
pub const SCALER: &str = "scaler.csv";
pub const ADJUSTED_PANEL: &str = "adjusted_panel.csv";
pub const CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOSS: &str = "train_loss.csv";
pub const FORECAST_SAMPLES: &str = "forecast_samples.csv";
pub const SCORES: &str = "scores.csv";
pub const SCORES_BY_REGION: &str = "scores_by_region.csv";
pub const SCORES_LONG: &str = "scores_long.csv";
pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    BuildSpatial,
    Estimate,
    Adjust,
    Train,
    Forecast,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Simulate,
        Stage::BuildSpatial,
        Stage::Estimate,
        Stage::Adjust,
        Stage::Train,
        Stage::Forecast,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::BuildSpatial => "build-spatial",
            Stage::Estimate => "estimate",
            Stage::Adjust => "adjust",
            Stage::Train => "train",
            Stage::Forecast => "forecast",
            Stage::Evaluate => "evaluate",
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Simulate => &[REGIONS, PANEL, GROUND_TRUTH, RUN_CONFIG],
            Stage::BuildSpatial => &[SPATIAL_MATRIX],
            Stage::Estimate => &[DID_ESTIMATE, DID_REPORT, SCALER],
            Stage::Adjust => &[ADJUSTED_PANEL],
            Stage::Train => &[CHECKPOINT, TRAIN_LOSS],
            Stage::Forecast => &[FORECAST_SAMPLES],
            Stage::Evaluate => &[SCORES, SCORES_BY_REGION, SCORES_LONG],
        }
    }

    pub fn run(self, cfg: &RunConfig) -> Result<()> {
        let r = match self {
            Stage::Simulate => simulate(cfg).map(|_| ()),
            Stage::BuildSpatial => build_spatial(cfg),
            Stage::Estimate => estimate(cfg),
            Stage::Adjust => adjust(cfg),
            Stage::Train => train(cfg).map(|_| ()),
            Stage::Forecast => forecast(cfg),
            Stage::Evaluate => evaluate(cfg).map(|_| ()),
        };
        r.map_err(|e| e.in_stage(self.name()))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage '{s}'")))
    }
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// Regions, treatment flags and the full panel.
pub fn load_panel(cfg: &RunConfig) -> Result<(RegionSet, Panel)> {
    let (regions, treated) = io::read_regions(&cfg.regions_path())?;
    let data = io::read_panel(&cfg.panel_path(), &regions, cfg.covariates.as_deref())?;
    let onset = cfg
        .post_onset_date
        .ok_or_else(|| Error::Config("post_onset_date is required".into()))?;
    let post = causal::post_from_onset(&data.times, onset);
    let panel = data.into_panel(&regions, treated, post)?;
    Ok((regions, panel))
}

/// Number of leading time steps used for estimation and training.
pub fn conditioning_len(cfg: &RunConfig, n_times: usize) -> Result<usize> {
    let m = cfg.model.horizon;
    let len = if cfg.holdout { n_times.saturating_sub(m) } else { n_times };
    let need = cfg.model.context_len + m;
    if len < need.max(3) {
        return Err(Error::InsufficientData(format!(
            "{len} conditioning steps (of {n_times}) cannot hold context_len {} + horizon {m}",
            cfg.model.context_len
        )));
    }
    Ok(len)
}

fn design_options(cfg: &RunConfig) -> DesignOptions {
    DesignOptions {
        spatial: !cfg.no_spatial,
        factors: !cfg.no_factors,
    }
}

/// Generates a synthetic panel into the output directory and returns the
/// configuration that points at it.
pub fn simulate(cfg: &RunConfig) -> Result<RunConfig> {
    let sim = synth::generate(&cfg.generator)?;
    let mut next = cfg.clone();
    next.regions = Some(out(cfg, REGIONS));
    next.panel = Some(out(cfg, PANEL));
    next.post_onset_date = Some(cfg.generator.onset_date());
    next.simulate = false;
    io::write_regions(&out(cfg, REGIONS), &sim.regions, sim.panel.treated())?;
    io::write_panel(&out(cfg, PANEL), &sim.panel)?;
    io::write_ground_truth(&out(cfg, GROUND_TRUTH), &sim.truth)?;
    io::write_text(&out(cfg, RUN_CONFIG), &next.to_file_string())?;
    Ok(next)
}

pub fn build_spatial(cfg: &RunConfig) -> Result<()> {
    let (regions, _) = io::read_regions(&cfg.regions_path())?;
    let s = SpatialMatrix::build(&regions, cfg.alpha)?;
    io::write_spatial_matrix(&out(cfg, SPATIAL_MATRIX), &s, &regions.ids())
}

fn read_spatial(cfg: &RunConfig, ids: &[String]) -> Result<SpatialMatrix> {
    io::read_spatial_matrix(&out(cfg, SPATIAL_MATRIX), ids, cfg.alpha)
}

/// Fits the target transform on the conditioning range, then the DiD
/// regression on the working scale.
pub fn estimate(cfg: &RunConfig) -> Result<()> {
    let (regions, panel) = load_panel(cfg)?;
    let ids = regions.ids();
    let len = conditioning_len(cfg, panel.n_times())?;
    let s = read_spatial(cfg, &ids)?;
    let transform = TargetTransform::fit(&panel.truncate(len)?.y().clone(), cfg.log1p, cfg.standardize)?;
    let working = panel.with_y(transform.forward(panel.y())?)?.truncate(len)?;
    let est = causal::estimate(&working, &s, design_options(cfg), InstrumentSet::SpatialLags)?;
    let report = causal::report_parameters(&est);
    io::write_did_estimate(&out(cfg, DID_ESTIMATE), &est)?;
    io::write_text(&out(cfg, DID_REPORT), &report.to_string())?;
    io::write_scaler(&out(cfg, SCALER), &ids, &transform)
}

pub fn adjust(cfg: &RunConfig) -> Result<()> {
    let (regions, panel) = load_panel(cfg)?;
    let ids = regions.ids();
    let s = read_spatial(cfg, &ids)?;
    let transform = io::read_scaler(&out(cfg, SCALER), &ids)?;
    let est = io::read_did_estimate(&out(cfg, DID_ESTIMATE))?;
    let working = panel.with_y(transform.forward(panel.y())?)?;
    let adjusted = causal::adjust(&working, &est, &s)?;
    let table = AdjustedTable {
        times: panel.times().to_vec(),
        y: working.y().clone(),
        adjusted,
    };
    io::write_adjusted_panel(&out(cfg, ADJUSTED_PANEL), &ids, &table)
}

fn history(table: &AdjustedTable, len: usize) -> causal::AdjustedPanel {
    causal::AdjustedPanel {
        y_tilde: table.adjusted.y_tilde.columns(0, len).into_owned(),
        z: table.adjusted.z.columns(0, len).into_owned(),
    }
}

/// Returns the per-epoch mean nll.
pub fn train(cfg: &RunConfig) -> Result<Vec<f64>> {
    let (regions, _) = io::read_regions(&cfg.regions_path())?;
    let ids = regions.ids();
    let table = io::read_adjusted_panel(&out(cfg, ADJUSTED_PANEL), &ids)?;
    let transform = io::read_scaler(&out(cfg, SCALER), &ids)?;
    let len = conditioning_len(cfg, table.times.len())?;
    let (model, trace) = probmodel::train(cfg.model.clone(), &history(&table, len), transform, ids)?;
    checkpoint::save(&model, &out(cfg, CHECKPOINT))?;
    io::write_train_loss(&out(cfg, TRAIN_LOSS), &trace)?;
    Ok(trace)
}

/// Dates of the `m` steps after the conditioning range.
fn horizon_dates(times: &[NaiveDate], len: usize, m: usize) -> Vec<NaiveDate> {
    let step = if times.len() >= 2 { times[1] - times[0] } else { chrono::Duration::days(1) };
    let last = times[len - 1];
    (1..=m as i32).map(|h| last + step * h).collect()
}

pub fn forecast(cfg: &RunConfig) -> Result<()> {
    let (regions, panel) = load_panel(cfg)?;
    let ids = regions.ids();
    let model: ForecastModel = checkpoint::load(&out(cfg, CHECKPOINT))?;
    if model.region_ids != ids {
        return Err(Error::Alignment("checkpoint regions differ from the regions file".into()));
    }
    let est = io::read_did_estimate(&out(cfg, DID_ESTIMATE))?;
    let table = io::read_adjusted_panel(&out(cfg, ADJUSTED_PANEL), &ids)?;
    let len = conditioning_len(cfg, table.times.len())?;
    let m = model.config.horizon;
    let dates = horizon_dates(&table.times, len, m);
    let onset = cfg
        .post_onset_date
        .ok_or_else(|| Error::Config("post_onset_date is required".into()))?;
    let shift = DMatrix::from_fn(ids.len(), m, |i, h| {
        if panel.treated()[i] && dates[h] >= onset {
            est.delta
        } else {
            0.0
        }
    });
    let coupling = SpatialCoupling::new(&read_spatial(cfg, &ids)?, est.rho);
    let fc = probmodel::forecast(&model, &history(&table, len), &coupling, Some(&shift))?;
    io::write_forecast_samples(&out(cfg, FORECAST_SAMPLES), &fc, &dates)
}

/// Scores the stored forecast against the observed panel values at the
/// forecast dates.
pub fn evaluate(cfg: &RunConfig) -> Result<ScoreReport> {
    let (_, panel) = load_panel(cfg)?;
    let (fc, dates) = io::read_forecast_samples(&out(cfg, FORECAST_SAMPLES))?;
    if fc.region_ids() != panel.region_ids() {
        return Err(Error::Alignment("forecast regions differ from the panel".into()));
    }
    let cols = dates
        .iter()
        .map(|d| {
            panel.times().iter().position(|t| t == d).ok_or_else(|| {
                Error::Alignment(format!(
                    "forecast date {d} is not in the panel; evaluation needs holdout = true"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let observed = DMatrix::from_fn(panel.n_regions(), cols.len(), |i, h| panel.y()[(i, cols[h])]);
    let report = metrics::score(&fc, &observed)?;
    let by_h = metrics::score_by_horizon(&fc, &observed)?;
    io::write_scores(&out(cfg, SCORES), &report.overall)?;
    io::write_scores_by_region(&out(cfg, SCORES_BY_REGION), &report)?;
    io::write_scores_long(&out(cfg, SCORES_LONG), &cfg.model_name, &by_h)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub config: RunConfig,
    pub train_loss: Vec<f64>,
    pub scores: ScoreReport,
}

/// Runs every stage in order, then writes the manifest. On failure the
/// manifest records the failing stage and marks artifacts from that stage
/// on as stale.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut cfg = cfg.clone();
    let mut trace = Vec::new();
    let mut scores = None;
    let stages: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| *s != Stage::Simulate || cfg.simulate)
        .collect();
    for &stage in &stages {
        log::info!("running stage {stage}");
        let r = match stage {
            Stage::Simulate => simulate(&cfg).map(|next| cfg = next),
            Stage::Train => train(&cfg).map(|t| trace = t),
            Stage::Evaluate => evaluate(&cfg).map(|s| scores = Some(s)),
            other => other.run(&cfg),
        };
        if let Err(e) = r {
            let e = e.in_stage(stage.name());
            write_manifest(&cfg, &stages, Some(stage))?;
            return Err(e);
        }
    }
    write_manifest(&cfg, &stages, None)?;
    Ok(PipelineOutcome {
        config: cfg,
        train_loss: trace,
        scores: scores.expect("evaluate ran"),
    })
}

/// `key=value` lines: the effective configuration, then one hash and status
/// per artifact.
pub fn write_manifest(cfg: &RunConfig, stages: &[Stage], failed: Option<Stage>) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("status={}\n", if failed.is_some() { "failed" } else { "ok" }));
    if let Some(f) = failed {
        text.push_str(&format!("failed_stage={f}\n"));
    }
    for (k, v) in cfg.to_key_values() {
        text.push_str(&format!("config.{k}={v}\n"));
    }
    let mut stale = false;
    for &stage in stages {
        stale |= Some(stage) == failed;
        for name in stage.outputs() {
            let path = out(cfg, name);
            if !path.exists() {
                continue;
            }
            let hash = io::sha256_file(&path)?;
            text.push_str(&format!("artifact.{name}.sha256={hash}\n"));
            text.push_str(&format!("artifact.{name}.status={}\n", if stale { "stale" } else { "ok" }));
        }
    }
    io::write_text(&out(cfg, MANIFEST), &text)
}

/// Reads `key=value` lines back.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}
