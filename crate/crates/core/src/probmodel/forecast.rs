//! Ancestral sampling of forecast paths.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::distribution::DistributionParams;
use super::model::{ForecastModel, HiddenState};
use crate::causal::{build_adjusted_input, AdjustedPanel};
use crate::error::{Error, Result};
use crate::metrics::{self, QuantileForecast};
use crate::spatial::SpatialMatrix;

/// Step-by-step generation for a single region. The encoder has consumed the
/// conditioning window; each `feed` appends one `(z, y)` input.
#[derive(Debug, Clone)]
pub struct Rollout<'a> {
    model: &'a ForecastModel,
    state: HiddenState,
    t: usize,
}

impl<'a> Rollout<'a> {
    /// `z` and `y` are the working-scale inputs of one region; the last
    /// `context_len` values are encoded.
    pub fn new(model: &'a ForecastModel, z: &[f64], y: &[f64]) -> Result<Self> {
        let c = model.config.context_len;
        if z.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "z vs y history length",
                expected: y.len(),
                actual: z.len(),
            });
        }
        if y.len() < c {
            return Err(Error::InsufficientData(format!(
                "history of {} steps is shorter than context_len {c}",
                y.len()
            )));
        }
        let mut state = model.zero_state();
        for t in y.len() - c..y.len() {
            state = model.encode_step(&state, z[t], y[t], t)?;
        }
        Ok(Self {
            model,
            state,
            t: y.len(),
        })
    }

    /// Predictive distribution of the next step.
    pub fn params(&self) -> DistributionParams {
        self.model.project(self.state.last().expect("at least one layer"))
    }

    pub fn feed(&mut self, z: f64, y: f64) -> Result<()> {
        self.state = self.model.encode_step(&self.state, z, y, self.t)?;
        self.t += 1;
        Ok(())
    }
}

/// Rebuilds the adjusted input from one joint draw of every region's target,
/// `z = y + rho * S y`, exactly as for observed data.
#[derive(Debug, Clone)]
pub struct SpatialCoupling {
    spatial: Option<(SpatialMatrix, f64)>,
}

impl SpatialCoupling {
    pub fn new(s: &SpatialMatrix, rho: f64) -> Self {
        Self {
            spatial: Some((s.clone(), rho)),
        }
    }

    /// `z = y`, as without the spatial block.
    pub fn none() -> Self {
        Self { spatial: None }
    }

    pub fn adjusted_input(&self, y: &[f64]) -> Result<Vec<f64>> {
        match &self.spatial {
            None => Ok(y.to_vec()),
            Some((s, rho)) => {
                let col = DMatrix::from_column_slice(y.len(), 1, y);
                Ok(build_adjusted_input(&col, s, *rho)?.iter().copied().collect())
            }
        }
    }
}

/// Sample paths for every region and horizon step, on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDistribution {
    region_ids: Vec<String>,
    horizon: usize,
    n_samples: usize,
    /// Cell-major: `(region * horizon + step) * n_samples + k`.
    samples: Vec<f64>,
    sorted: Vec<f64>,
}

impl ForecastDistribution {
    /// `samples[i][t]` holds the draws of region `i` at step `t`.
    pub fn from_samples(region_ids: Vec<String>, samples: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if samples.len() != region_ids.len() {
            return Err(Error::DimensionMismatch {
                what: "forecast regions",
                expected: region_ids.len(),
                actual: samples.len(),
            });
        }
        let horizon = samples.first().map_or(0, Vec::len);
        let n_samples = samples.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if horizon == 0 || n_samples == 0 {
            return Err(Error::InvalidInput("empty forecast".into()));
        }
        let mut flat = Vec::with_capacity(region_ids.len() * horizon * n_samples);
        for region in &samples {
            if region.len() != horizon {
                return Err(Error::DimensionMismatch {
                    what: "forecast horizon",
                    expected: horizon,
                    actual: region.len(),
                });
            }
            for cell in region {
                if cell.len() != n_samples {
                    return Err(Error::DimensionMismatch {
                        what: "samples per cell",
                        expected: n_samples,
                        actual: cell.len(),
                    });
                }
                flat.extend_from_slice(cell);
            }
        }
        let mut sorted = flat.clone();
        for cell in sorted.chunks_mut(n_samples) {
            cell.sort_by(f64::total_cmp);
        }
        Ok(Self {
            region_ids,
            horizon,
            n_samples,
            samples: flat,
            sorted,
        })
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn n_regions(&self) -> usize {
        self.region_ids.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    fn offset(&self, region: usize, step: usize) -> usize {
        (region * self.horizon + step) * self.n_samples
    }

    /// Draws for one cell in path order.
    pub fn cell(&self, region: usize, step: usize) -> &[f64] {
        let o = self.offset(region, step);
        &self.samples[o..o + self.n_samples]
    }

    pub fn mean(&self, region: usize, step: usize) -> f64 {
        self.cell(region, step).iter().sum::<f64>() / self.n_samples as f64
    }

    /// Single-step slice at horizon step `t`.
    pub fn step(&self, t: usize) -> ForecastDistribution {
        let samples = (0..self.n_regions())
            .map(|i| vec![self.cell(i, t).to_vec()])
            .collect();
        Self::from_samples(self.region_ids.clone(), samples).expect("shape preserved")
    }

    /// Path `k` as an `N x m` matrix.
    pub fn path(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_regions(), self.horizon, |i, t| self.cell(i, t)[k])
    }
}

impl QuantileForecast for ForecastDistribution {
    fn n_regions(&self) -> usize {
        self.region_ids.len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn quantile(&self, region: usize, step: usize, q: f64) -> f64 {
        let o = self.offset(region, step);
        metrics::quantile_sorted(&self.sorted[o..o + self.n_samples], q)
    }
}

/// Draws `config.num_samples` joint paths of length `config.horizon` after
/// the end of `history` (working scale, `N x T`).
///
/// All regions advance together: each step draws every region's target, then
/// `coupling` turns the draws into the next adjusted input. Path `k` uses its
/// own ChaCha stream `k` under `config.seed`. `shift` (`N x m`, working scale)
/// is added to every draw before the inverse target transform; it re-applies
/// the estimated intervention effect to the counterfactual forecast.
pub fn forecast(
    model: &ForecastModel,
    history: &AdjustedPanel,
    coupling: &SpatialCoupling,
    shift: Option<&DMatrix<f64>>,
) -> Result<ForecastDistribution> {
    let n = model.region_ids.len();
    let m = model.config.horizon;
    let n_samples = model.config.num_samples;
    if history.y_tilde.nrows() != n || history.z.shape() != history.y_tilde.shape() {
        return Err(Error::DimensionMismatch {
            what: "history regions",
            expected: n,
            actual: history.y_tilde.nrows(),
        });
    }
    if let Some(s) = shift {
        if s.shape() != (n, m) {
            return Err(Error::DimensionMismatch {
                what: "shift horizon",
                expected: m,
                actual: s.ncols(),
            });
        }
    }

    let t0 = history.y_tilde.ncols();
    let start = (0..n)
        .map(|i| {
            let z: Vec<f64> = history.z.row(i).iter().copied().collect();
            let y: Vec<f64> = history.y_tilde.row(i).iter().copied().collect();
            Rollout::new(model, &z, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![vec![Vec::with_capacity(n_samples); m]; n];
    let mut draws = vec![0.0; n];
    for k in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        rng.set_stream(k as u64);
        let mut rolls = start.clone();
        for t in 0..m {
            for (i, roll) in rolls.iter().enumerate() {
                let d = roll.params().sample(&mut rng);
                if !d.is_finite() {
                    return Err(Error::NonFinite { t: t0 + t });
                }
                draws[i] = d;
                let shifted = d + shift.map_or(0.0, |s| s[(i, t)]);
                out[i][t].push(model.input_scaler.inverse_value(i, shifted));
            }
            if t + 1 < m {
                let z = coupling.adjusted_input(&draws)?;
                for (i, roll) in rolls.iter_mut().enumerate() {
                    roll.feed(z[i], draws[i])?;
                }
            }
        }
    }
    ForecastDistribution::from_samples(model.region_ids.clone(), out)
}
