//! Stacked GRU encoder with an affine distribution head, trained by
//! teacher-forced negative log-likelihood with momentum SGD.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::distribution::{DistributionParams, Family};
use crate::causal::{AdjustedPanel, TargetTransform};
use crate::error::{Error, Result};

pub const MOMENTUM: f64 = 0.9;
/// Inputs per step: the adjusted input `z` and the (adjusted) target.
pub const INPUT_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub distribution: Family,
    /// Conditioning length `t0`.
    pub context_len: usize,
    /// Prediction length `m`.
    pub horizon: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
    pub num_samples: usize,
    /// Windows per SGD step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_size: 16,
            num_layers: 1,
            distribution: Family::Gaussian,
            context_len: 25,
            horizon: 5,
            learning_rate: 0.01,
            epochs: 20,
            grad_clip: 5.0,
            num_samples: 100,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_size", self.hidden_size),
            ("num_layers", self.num_layers),
            ("context_len", self.context_len),
            ("horizon", self.horizon),
            ("epochs", self.epochs),
            ("num_samples", self.num_samples),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config(format!(
                "grad_clip must be positive, got {}",
                self.grad_clip
            )));
        }
        if self.context_len != 5 * self.horizon {
            log::warn!(
                "context_len {} : horizon {} departs from the 5:1 default ratio",
                self.context_len,
                self.horizon
            );
        }
        Ok(())
    }
}

/// Offsets of one GRU layer's tensors inside the flat parameter vector.
/// Gate order within each `3H` block is reset, update, candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    pub input: usize,
    pub hidden: usize,
    pub w_ih: usize,
    pub w_hh: usize,
    pub b_ih: usize,
    pub b_hh: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub layers: Vec<LayerLayout>,
    pub hidden: usize,
    pub arity: usize,
    pub head_w: usize,
    pub head_b: usize,
    pub total: usize,
}

/// Named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    /// Initialisation bound denominator.
    pub fan_in: usize,
}

impl ParamLayout {
    pub fn new(hidden: usize, num_layers: usize, family: Family) -> Self {
        let mut off = 0;
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let input = if l == 0 { INPUT_DIM } else { hidden };
            let w_ih = off;
            off += 3 * hidden * input;
            let w_hh = off;
            off += 3 * hidden * hidden;
            let b_ih = off;
            off += 3 * hidden;
            let b_hh = off;
            off += 3 * hidden;
            layers.push(LayerLayout {
                input,
                hidden,
                w_ih,
                w_hh,
                b_ih,
                b_hh,
            });
        }
        let arity = family.arity();
        let head_w = off;
        off += arity * hidden;
        let head_b = off;
        off += arity;
        Self {
            layers,
            hidden,
            arity,
            head_w,
            head_b,
            total: off,
        }
    }

    pub fn tensors(&self) -> Vec<TensorSpec> {
        let mut out = Vec::new();
        for (l, ly) in self.layers.iter().enumerate() {
            let h3 = 3 * ly.hidden;
            out.push(TensorSpec { name: format!("gru{l}.w_ih"), offset: ly.w_ih, rows: h3, cols: ly.input, fan_in: ly.input });
            out.push(TensorSpec { name: format!("gru{l}.w_hh"), offset: ly.w_hh, rows: h3, cols: ly.hidden, fan_in: ly.hidden });
            out.push(TensorSpec { name: format!("gru{l}.b_ih"), offset: ly.b_ih, rows: h3, cols: 1, fan_in: ly.hidden });
            out.push(TensorSpec { name: format!("gru{l}.b_hh"), offset: ly.b_hh, rows: h3, cols: 1, fan_in: ly.hidden });
        }
        out.push(TensorSpec { name: "head.w".into(), offset: self.head_w, rows: self.arity, cols: self.hidden, fan_in: self.hidden });
        out.push(TensorSpec { name: "head.b".into(), offset: self.head_b, rows: self.arity, cols: 1, fan_in: self.hidden });
        out
    }
}

/// Per-layer hidden vectors.
pub type HiddenState = Vec<Vec<f64>>;

/// Everything the backward pass needs from one cell evaluation.
#[derive(Debug, Clone)]
struct CellCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn h_prev + b_hn`
    hn: Vec<f64>,
    h: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    super::distribution::sigmoid(x)
}

fn cell_forward(p: &[f64], l: &LayerLayout, x: &[f64], h_prev: &[f64]) -> CellCache {
    let (hd, inp) = (l.hidden, l.input);
    let mut gi = vec![0.0; 3 * hd];
    let mut gh = vec![0.0; 3 * hd];
    for g in 0..3 * hd {
        let wi = &p[l.w_ih + g * inp..l.w_ih + (g + 1) * inp];
        gi[g] = p[l.b_ih + g] + wi.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        let wh = &p[l.w_hh + g * hd..l.w_hh + (g + 1) * hd];
        gh[g] = p[l.b_hh + g] + wh.iter().zip(h_prev).map(|(w, v)| w * v).sum::<f64>();
    }
    let mut r = vec![0.0; hd];
    let mut u = vec![0.0; hd];
    let mut n = vec![0.0; hd];
    let mut hn = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    for j in 0..hd {
        r[j] = sigmoid(gi[j] + gh[j]);
        u[j] = sigmoid(gi[hd + j] + gh[hd + j]);
        hn[j] = gh[2 * hd + j];
        n[j] = (gi[2 * hd + j] + r[j] * hn[j]).tanh();
        h[j] = (1.0 - u[j]) * n[j] + u[j] * h_prev[j];
    }
    CellCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        r,
        u,
        n,
        hn,
        h,
    }
}

/// Accumulates parameter gradients into `grad`, writes the input gradient to
/// `dx` and the recurrent gradient to `dh_prev` (both overwritten).
fn cell_backward(
    p: &[f64],
    l: &LayerLayout,
    c: &CellCache,
    dh: &[f64],
    grad: &mut [f64],
    dx: &mut [f64],
    dh_prev: &mut [f64],
) {
    let (hd, inp) = (l.hidden, l.input);
    let mut dgi = vec![0.0; 3 * hd];
    let mut dgh = vec![0.0; 3 * hd];
    for j in 0..hd {
        let dn = dh[j] * (1.0 - c.u[j]);
        let du = dh[j] * (c.h_prev[j] - c.n[j]);
        dh_prev[j] = dh[j] * c.u[j];
        let dan = dn * (1.0 - c.n[j] * c.n[j]);
        let dr = dan * c.hn[j];
        let dhn = dan * c.r[j];
        let dau = du * c.u[j] * (1.0 - c.u[j]);
        let dar = dr * c.r[j] * (1.0 - c.r[j]);
        dgi[j] = dar;
        dgi[hd + j] = dau;
        dgi[2 * hd + j] = dan;
        dgh[j] = dar;
        dgh[hd + j] = dau;
        dgh[2 * hd + j] = dhn;
    }
    dx.iter_mut().for_each(|v| *v = 0.0);
    for g in 0..3 * hd {
        let a = dgi[g];
        grad[l.b_ih + g] += a;
        for k in 0..inp {
            grad[l.w_ih + g * inp + k] += a * c.x[k];
            dx[k] += p[l.w_ih + g * inp + k] * a;
        }
        let b = dgh[g];
        grad[l.b_hh + g] += b;
        for k in 0..hd {
            grad[l.w_hh + g * hd + k] += b * c.h_prev[k];
            dh_prev[k] += p[l.w_hh + g * hd + k] * b;
        }
    }
}

/// Training window: `context_len + horizon` consecutive steps of one region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub region: usize,
    pub start: usize,
}

/// Every window start for every region (stride 1).
pub fn make_windows(
    n_regions: usize,
    t_len: usize,
    context_len: usize,
    horizon: usize,
) -> Result<Vec<Window>> {
    let len = context_len + horizon;
    if t_len < len {
        return Err(Error::InsufficientData(format!(
            "{t_len} time steps cannot hold a window of context {context_len} + horizon {horizon}"
        )));
    }
    Ok((0..n_regions)
        .flat_map(|region| (0..=t_len - len).map(move |start| Window { region, start }))
        .collect())
}

/// Encoder inputs and likelihood targets of one window.
///
/// Inputs cover `context_len + horizon - 1` steps and are teacher-forced in
/// both channels. The hidden state after input `k` predicts the target at
/// `k + 1`; only predictions inside the horizon enter the loss.
#[derive(Debug, Clone)]
pub struct WindowSequence {
    pub inputs: Vec<[f64; INPUT_DIM]>,
    /// `(input step whose output is scored, target value)`.
    pub targets: Vec<(usize, f64)>,
}

pub fn window_sequence(
    data: &AdjustedPanel,
    w: Window,
    context_len: usize,
    horizon: usize,
) -> WindowSequence {
    let steps = context_len + horizon - 1;
    let inputs = (0..steps)
        .map(|k| {
            let t = w.start + k;
            [data.z[(w.region, t)], data.y_tilde[(w.region, t)]]
        })
        .collect();
    let targets = (context_len - 1..steps)
        .map(|k| (k, data.y_tilde[(w.region, w.start + k + 1)]))
        .collect();
    WindowSequence { inputs, targets }
}

/// Trained (or freshly initialised) forecaster.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    /// Target preprocessing fitted at train time; forecasts are mapped back
    /// through it.
    pub input_scaler: TargetTransform,
    pub region_ids: Vec<String>,
}

impl ForecastModel {
    /// Uniform `+-1/sqrt(fan_in)` initialisation from `config.seed`.
    pub fn new(config: ModelConfig, region_ids: Vec<String>, input_scaler: TargetTransform) -> Result<Self> {
        config.validate()?;
        if input_scaler.n_regions() != region_ids.len() {
            return Err(Error::DimensionMismatch {
                what: "scaler regions",
                expected: region_ids.len(),
                actual: input_scaler.n_regions(),
            });
        }
        let layout = ParamLayout::new(config.hidden_size, config.num_layers, config.distribution);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.total];
        for t in layout.tensors() {
            let bound = 1.0 / (t.fan_in as f64).sqrt();
            for v in &mut params[t.offset..t.offset + t.rows * t.cols] {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            config,
            layout,
            params,
            input_scaler,
            region_ids,
        })
    }

    pub fn family(&self) -> Family {
        self.config.distribution
    }

    pub fn zero_state(&self) -> HiddenState {
        vec![vec![0.0; self.config.hidden_size]; self.config.num_layers]
    }

    /// One recurrent step over all layers. `t` only labels errors.
    pub fn encode_step(&self, state: &HiddenState, z: f64, y: f64, t: usize) -> Result<HiddenState> {
        if !(z.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        if state.len() != self.layout.layers.len()
            || state.iter().any(|h| h.len() != self.layout.hidden)
        {
            return Err(Error::DimensionMismatch {
                what: "hidden state size",
                expected: self.layout.hidden,
                actual: state.first().map_or(0, Vec::len),
            });
        }
        let mut x = vec![z, y];
        let mut next = Vec::with_capacity(state.len());
        for (l, ly) in self.layout.layers.iter().enumerate() {
            let c = cell_forward(&self.params, ly, &x, &state[l]);
            x = c.h.clone();
            next.push(c.h);
        }
        Ok(next)
    }

    fn head_raw(&self, h: &[f64]) -> [f64; 3] {
        let ly = &self.layout;
        let mut raw = [0.0; 3];
        for (k, r) in raw.iter_mut().enumerate().take(ly.arity) {
            let w = &self.params[ly.head_w + k * ly.hidden..ly.head_w + (k + 1) * ly.hidden];
            *r = self.params[ly.head_b + k] + w.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        }
        raw
    }

    /// Distribution parameters from the top-layer hidden vector.
    pub fn project(&self, hidden_top: &[f64]) -> DistributionParams {
        DistributionParams::from_raw(self.family(), &self.head_raw(hidden_top))
    }

    /// Summed nll of one window and its gradient (accumulated into `grad`).
    fn window_loss_grad(&self, seq: &WindowSequence, grad: Option<&mut [f64]>) -> f64 {
        let layers = &self.layout.layers;
        let n_layers = layers.len();
        let hd = self.layout.hidden;
        let steps = seq.inputs.len();
        let mut caches: Vec<Vec<CellCache>> = Vec::with_capacity(steps);
        let mut state = vec![vec![0.0; hd]; n_layers];
        for inp in &seq.inputs {
            let mut x = inp.to_vec();
            let mut step = Vec::with_capacity(n_layers);
            for (l, ly) in layers.iter().enumerate() {
                let c = cell_forward(&self.params, ly, &x, &state[l]);
                x = c.h.clone();
                state[l] = c.h.clone();
                step.push(c);
            }
            caches.push(step);
        }

        let mut loss = 0.0;
        let mut d_top = vec![vec![0.0; hd]; steps];
        let mut head_grad = vec![0.0; self.layout.total];
        for &(k, target) in &seq.targets {
            let h = &caches[k][n_layers - 1].h;
            let raw = self.head_raw(h);
            let dist = DistributionParams::from_raw(self.family(), &raw);
            loss += dist.nll(target);
            if grad.is_some() {
                let g = dist.nll_grad_raw(target, &raw);
                let ly = &self.layout;
                for a in 0..ly.arity {
                    head_grad[ly.head_b + a] += g[a];
                    for j in 0..hd {
                        head_grad[ly.head_w + a * hd + j] += g[a] * h[j];
                        d_top[k][j] += self.params[ly.head_w + a * hd + j] * g[a];
                    }
                }
            }
        }
        let Some(grad) = grad else {
            return loss;
        };
        for (g, h) in grad.iter_mut().zip(&head_grad) {
            *g += h;
        }

        let mut d_rec = vec![vec![0.0; hd]; n_layers];
        let mut dh_prev = vec![0.0; hd];
        for k in (0..steps).rev() {
            let mut incoming = d_top[k].clone();
            for l in (0..n_layers).rev() {
                let ly = &layers[l];
                let dh: Vec<f64> = incoming.iter().zip(&d_rec[l]).map(|(a, b)| a + b).collect();
                let mut dx = vec![0.0; ly.input];
                cell_backward(&self.params, ly, &caches[k][l], &dh, grad, &mut dx, &mut dh_prev);
                d_rec[l].copy_from_slice(&dh_prev);
                incoming = dx;
            }
        }
        loss
    }

    /// Summed nll over `windows`, its gradient and the number of scored steps.
    pub fn loss_and_grad(&self, data: &AdjustedPanel, windows: &[Window]) -> (f64, Vec<f64>, usize) {
        let mut grad = vec![0.0; self.layout.total];
        let mut loss = 0.0;
        let mut count = 0;
        for &w in windows {
            let seq = window_sequence(data, w, self.config.context_len, self.config.horizon);
            count += seq.targets.len();
            loss += self.window_loss_grad(&seq, Some(&mut grad));
        }
        (loss, grad, count)
    }

    /// Summed nll over `windows`.
    pub fn loss(&self, data: &AdjustedPanel, windows: &[Window]) -> f64 {
        windows
            .iter()
            .map(|&w| {
                let seq = window_sequence(data, w, self.config.context_len, self.config.horizon);
                self.window_loss_grad(&seq, None)
            })
            .sum()
    }

    /// Momentum SGD over shuffled windows; returns the mean per-step nll of
    /// every epoch.
    pub fn fit(&mut self, data: &AdjustedPanel) -> Result<Vec<f64>> {
        let (n, t_len) = data.y_tilde.shape();
        if data.z.shape() != (n, t_len) {
            return Err(Error::DimensionMismatch {
                what: "z vs y_tilde columns",
                expected: t_len,
                actual: data.z.ncols(),
            });
        }
        if n != self.region_ids.len() {
            return Err(Error::DimensionMismatch {
                what: "training regions",
                expected: self.region_ids.len(),
                actual: n,
            });
        }
        check_finite(&data.z)?;
        check_finite(&data.y_tilde)?;
        let cfg = self.config.clone();
        let mut windows = make_windows(n, t_len, cfg.context_len, cfg.horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let mut velocity = vec![0.0; self.layout.total];
        let mut trace = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            windows.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut epoch_count = 0usize;
            for batch in windows.chunks(cfg.batch_size) {
                let (loss, mut grad, count) = self.loss_and_grad(data, batch);
                if !loss.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        learning_rate: cfg.learning_rate,
                    });
                }
                epoch_loss += loss;
                epoch_count += count;
                let scale = 1.0 / count as f64;
                grad.iter_mut().for_each(|g| *g *= scale);
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cfg.grad_clip {
                    let c = cfg.grad_clip / norm;
                    grad.iter_mut().for_each(|g| *g *= c);
                }
                for ((p, v), g) in self.params.iter_mut().zip(&mut velocity).zip(&grad) {
                    *v = MOMENTUM * *v + g;
                    *p -= cfg.learning_rate * *v;
                }
            }
            let mean = epoch_loss / epoch_count as f64;
            if !mean.is_finite() || self.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    learning_rate: cfg.learning_rate,
                });
            }
            log::debug!("epoch {epoch}: mean nll {mean:.6}");
            trace.push(mean);
        }
        Ok(trace)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    match m.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFinite { t: k / n }),
        None => Ok(()),
    }
}

/// Initialises a model and fits it; returns the model and per-epoch loss.
pub fn train(
    config: ModelConfig,
    data: &AdjustedPanel,
    input_scaler: TargetTransform,
    region_ids: Vec<String>,
) -> Result<(ForecastModel, Vec<f64>)> {
    let mut model = ForecastModel::new(config, region_ids, input_scaler)?;
    let trace = model.fit(data)?;
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(family: Family, hidden: usize, layers: usize, seed: u64) -> ForecastModel {
        let cfg = ModelConfig {
            hidden_size: hidden,
            num_layers: layers,
            distribution: family,
            context_len: 5,
            horizon: 2,
            seed,
            ..Default::default()
        };
        ForecastModel::new(cfg, vec!["a".into(), "b".into()], TargetTransform::identity(2)).unwrap()
    }

    fn data(t: usize) -> AdjustedPanel {
        AdjustedPanel {
            y_tilde: DMatrix::from_fn(2, t, |i, k| ((i * 5 + k) as f64 * 0.41).sin()),
            z: DMatrix::from_fn(2, t, |i, k| ((i * 3 + k) as f64 * 0.23).cos()),
        }
    }

    #[test]
    fn zero_weights_keep_origin() {
        let mut m = model(Family::Gaussian, 4, 2, 1);
        m.params.iter_mut().for_each(|p| *p = 0.0);
        let h = m.encode_step(&m.zero_state(), 0.0, 0.0, 0).unwrap();
        assert!(h.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn encode_step_is_pure() {
        let m = model(Family::Laplace, 4, 2, 2);
        let s = m.zero_state();
        let a = m.encode_step(&s, 0.3, -1.2, 0).unwrap();
        let b = m.encode_step(&s, 0.3, -1.2, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_step_rejects_non_finite() {
        let m = model(Family::Gaussian, 3, 1, 0);
        assert!(matches!(
            m.encode_step(&m.zero_state(), f64::NAN, 0.0, 17),
            Err(Error::NonFinite { t: 17 })
        ));
    }

    #[test]
    fn parameter_counts() {
        for (family, k) in [(Family::Gaussian, 2), (Family::Laplace, 2), (Family::StudentT, 3)] {
            let m = model(family, 4, 2, 0);
            let h = 4;
            let want = 3 * h * 2 + 3 * h * h + 6 * h + 3 * h * h + 3 * h * h + 6 * h + k * h + k;
            assert_eq!(m.params.len(), want);
        }
    }

    #[test]
    fn windows_cover_the_series() {
        let w = make_windows(2, 10, 5, 2).unwrap();
        assert_eq!(w.len(), 2 * 4);
        assert!(make_windows(2, 6, 5, 2).is_err());
        let seq = window_sequence(&data(10), Window { region: 1, start: 2 }, 5, 2);
        assert_eq!(seq.inputs.len(), 6);
        assert_eq!(seq.targets.iter().map(|t| t.0).collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(seq.inputs[5], [data(10).z[(1, 7)], data(10).y_tilde[(1, 7)]]);
        assert_eq!(seq.targets[1].1, data(10).y_tilde[(1, 8)]);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let mut m = model(Family::StudentT, 4, 1, 5);
        m.config.learning_rate = 0.0;
        m.config.epochs = 3;
        let before = m.params.clone();
        m.fit(&data(20)).unwrap();
        assert!(before.iter().zip(&m.params).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn divergence_is_reported() {
        let mut m = model(Family::Gaussian, 4, 1, 5);
        let mut d = data(20);
        d.y_tilde[(0, 3)] = f64::INFINITY;
        assert!(m.fit(&d).is_err());
    }
}
