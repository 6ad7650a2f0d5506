//! Feedforward and recurrent force regressors with analytic gradients.
//!
//! Parameter layout (row-major matrices, gates stacked in the order given):
//!
//! * recurrent layer `l` with `G` gates: `W` (`G*h x in_l`), `U` (`G*h x h`),
//!   `b` (`G*h`). RNN has `G = 1`; GRU `G = 3` (update, reset, candidate);
//!   LSTM `G = 4` (input, forget, cell, output).
//! * MLP layer `l`: `W` (`h x in_l`), `b` (`h`), applied to the last frame.
//! * readout: `W_out` (`3 x h`), `b_out` (`3`).
//!
//! `in_0` is the feature dimension, every later layer takes `h` inputs.

mod adam;
mod cells;
mod linalg;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ForceVector;

pub use adam::AdamState;
pub use train::{evaluate, train, EpochRecord, RmseReport, TrainConfig, TrainOutcome};

pub const OUT_DIM: usize = 3;
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Mlp,
    Rnn,
    Lstm,
    Gru,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Mlp, Arch::Rnn, Arch::Lstm, Arch::Gru];

    /// Gate blocks per recurrent layer; 0 for the MLP.
    pub fn gates(self) -> usize {
        match self {
            Arch::Mlp => 0,
            Arch::Rnn => 1,
            Arch::Gru => 3,
            Arch::Lstm => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::Rnn => "rnn",
            Arch::Lstm => "lstm",
            Arch::Gru => "gru",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Arch::Mlp),
            "rnn" => Ok(Arch::Rnn),
            "lstm" => Ok(Arch::Lstm),
            "gru" => Ok(Arch::Gru),
            _ => Err(Error::Config(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl ModelSpec {
    pub fn new(arch: Arch, layers: usize, hidden: usize, in_dim: usize) -> Result<Self> {
        let spec = Self {
            arch,
            layers,
            hidden,
            in_dim,
            out_dim: OUT_DIM,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.in_dim == 0 {
            return Err(Error::Config(format!(
                "layers, hidden and in_dim must be positive: {self:?}"
            )));
        }
        if self.out_dim != OUT_DIM {
            return Err(Error::Config(format!("out_dim must be {OUT_DIM}")));
        }
        Ok(())
    }

    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.in_dim
        } else {
            self.hidden
        }
    }

    pub fn layer_param_count(&self, l: usize) -> usize {
        let (i, h) = (self.layer_input(l), self.hidden);
        match self.arch {
            Arch::Mlp => i * h + h,
            a => a.gates() * (i * h + h * h + h),
        }
    }

    pub fn param_count(&self) -> usize {
        (0..self.layers).map(|l| self.layer_param_count(l)).sum::<usize>()
            + OUT_DIM * self.hidden
            + OUT_DIM
    }

    /// Offset of layer `l` in the flat parameter array; `l == layers` gives
    /// the readout offset.
    pub fn layer_offset(&self, l: usize) -> usize {
        (0..l).map(|k| self.layer_param_count(k)).sum()
    }

    pub fn label(&self) -> String {
        format!("{}({},{})", self.arch, self.layers, self.hidden)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub layout_version: u32,
    pub spec: ModelSpec,
    pub params: Vec<f64>,
}

impl ModelWeights {
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            layout_version: LAYOUT_VERSION,
            spec,
            params: vec![0.0; spec.param_count()],
        })
    }

    pub fn from_params(spec: ModelSpec, params: Vec<f64>) -> Result<Self> {
        let w = Self {
            layout_version: LAYOUT_VERSION,
            spec,
            params,
        };
        w.validate()?;
        Ok(w)
    }

    /// Xavier-uniform kernels (each gate block separately), zero biases.
    pub fn xavier(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut w = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = spec.hidden;
        let mut fill = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in slice {
                *x = rng.random_range(-limit..=limit);
            }
        };
        for l in 0..spec.layers {
            let i = spec.layer_input(l);
            let p = &mut w.params[spec.layer_offset(l)..spec.layer_offset(l + 1)];
            let g = spec.arch.gates();
            if g == 0 {
                fill(&mut p[..h * i], i, h);
            } else {
                let (wk, rest) = p.split_at_mut(g * h * i);
                for block in wk.chunks_exact_mut(h * i) {
                    fill(block, i, h);
                }
                for block in rest[..g * h * h].chunks_exact_mut(h * h) {
                    fill(block, h, h);
                }
            }
        }
        let ro = spec.layer_offset(spec.layers);
        fill(&mut w.params[ro..ro + OUT_DIM * h], h, OUT_DIM);
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.layout_version != LAYOUT_VERSION {
            return Err(Error::Config(format!(
                "unsupported weight layout version {}",
                self.layout_version
            )));
        }
        if self.params.len() != self.spec.param_count() {
            return Err(Error::LengthMismatch {
                what: "params",
                expected: self.spec.param_count(),
                actual: self.params.len(),
            });
        }
        Ok(())
    }

    /// Estimate for one window (`frames x in_dim`, row-major).
    pub fn forward(&self, window: &[f64]) -> Result<ForceVector> {
        let mut ws = Workspace::new(&self.spec, frames_of(&self.spec, window)?);
        Ok(ForceVector::from_array(ws.forward(self, window)))
    }

    /// Mean-squared-error loss and its gradient over a batch.
    pub fn loss_and_gradient(&self, batch: &[(&[f64], ForceVector)]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let stats = batch_gradient(self, batch, &mut grad)?;
        Ok((stats.loss, grad))
    }

    pub fn backward(&self, batch: &[(&[f64], ForceVector)]) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(batch)?.1)
    }

    pub fn loss(&self, batch: &[(&[f64], ForceVector)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut sse = 0.0;
        let mut ws: Option<Workspace> = None;
        for (x, y) in batch {
            let t = frames_of(&self.spec, x)?;
            if ws.as_ref().is_none_or(|w| w.frames != t) {
                ws = Some(Workspace::new(&self.spec, t));
            }
            let ws = ws.as_mut().expect("workspace just set");
            let out = ws.forward(self, x);
            sse += out
                .iter()
                .zip(y.to_array())
                .map(|(o, t)| (o - t).powi(2))
                .sum::<f64>();
        }
        Ok(sse / (OUT_DIM * batch.len()) as f64)
    }
}

fn frames_of(spec: &ModelSpec, window: &[f64]) -> Result<usize> {
    if window.is_empty() || window.len() % spec.in_dim != 0 {
        return Err(Error::Dimension(format!(
            "window of {} values is not a whole number of {}-wide frames",
            window.len(),
            spec.in_dim
        )));
    }
    Ok(window.len() / spec.in_dim)
}

/// Per-batch accumulated statistics.
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchStats {
    pub loss: f64,
    /// Sum of squared errors per output axis.
    pub sse: [f64; 3],
    pub count: usize,
}

/// Adds the batch-mean gradient of the MSE loss into `grad`.
pub fn batch_gradient(w: &ModelWeights, batch: &[(&[f64], ForceVector)], grad: &mut [f64]) -> Result<BatchStats> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if grad.len() != w.params.len() {
        return Err(Error::LengthMismatch {
            what: "gradient",
            expected: w.params.len(),
            actual: grad.len(),
        });
    }
    let t = frames_of(&w.spec, batch[0].0)?;
    let mut ws = Workspace::new(&w.spec, t);
    ws.batch_gradient(w, batch, grad)
}

/// Reusable buffers for forward and backward passes at a fixed window length.
#[derive(Debug, Clone)]
pub struct Workspace {
    frames: usize,
    layers: Vec<cells::LayerCache>,
    top_grad: Vec<f64>,
    in_grad: Vec<f64>,
}

impl Workspace {
    pub fn new(spec: &ModelSpec, frames: usize) -> Self {
        let t = if spec.arch == Arch::Mlp { 1 } else { frames };
        let layers = (0..spec.layers)
            .map(|l| cells::LayerCache::new(spec.arch, t, spec.layer_input(l), spec.hidden))
            .collect();
        Self {
            frames,
            layers,
            top_grad: vec![0.0; t * spec.hidden],
            in_grad: vec![0.0; t * spec.hidden.max(spec.in_dim)],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn forward(&mut self, w: &ModelWeights, window: &[f64]) -> [f64; 3] {
        let spec = &w.spec;
        let input = if spec.arch == Arch::Mlp {
            &window[window.len() - spec.in_dim..]
        } else {
            window
        };
        for l in 0..spec.layers {
            let p = &w.params[spec.layer_offset(l)..spec.layer_offset(l + 1)];
            let (done, rest) = self.layers.split_at_mut(l);
            let x = if l == 0 { input } else { &done[l - 1].hs[..] };
            rest[0].forward(spec.arch, p, x);
        }
        let h = spec.hidden;
        let top = self.layers.last().expect("at least one layer");
        let last = &top.hs[top.hs.len() - h..];
        let ro = &w.params[spec.layer_offset(spec.layers)..];
        let mut out = [ro[OUT_DIM * h], ro[OUT_DIM * h + 1], ro[OUT_DIM * h + 2]];
        linalg::gemv_acc(&mut out, &ro[..OUT_DIM * h], h, last);
        out
    }

    /// Backward pass for the window last passed to `forward`, given `dy`.
    fn backward(&mut self, w: &ModelWeights, window: &[f64], dy: &[f64; 3], grad: &mut [f64]) {
        let spec = &w.spec;
        let h = spec.hidden;
        let ro_off = spec.layer_offset(spec.layers);
        let ro = &w.params[ro_off..];
        {
            let top = self.layers.last().expect("at least one layer");
            let last = &top.hs[top.hs.len() - h..];
            let (gw, gb) = grad[ro_off..].split_at_mut(OUT_DIM * h);
            linalg::outer_acc(gw, dy, last);
            for (g, d) in gb.iter_mut().zip(dy) {
                *g += d;
            }
        }
        let t = self.top_grad.len() / h;
        self.top_grad.fill(0.0);
        linalg::gemv_t_acc(&mut self.top_grad[(t - 1) * h..], &ro[..OUT_DIM * h], h, dy);
        let input = if spec.arch == Arch::Mlp {
            &window[window.len() - spec.in_dim..]
        } else {
            window
        };
        for l in (0..spec.layers).rev() {
            let (lo, hi) = (spec.layer_offset(l), spec.layer_offset(l + 1));
            let in_l = spec.layer_input(l);
            let (below, here) = self.layers.split_at_mut(l);
            let x: &[f64] = if l == 0 { input } else { &below[l - 1].hs };
            let dx = if l == 0 {
                None
            } else {
                let buf = &mut self.in_grad[..t * in_l];
                buf.fill(0.0);
                Some(buf)
            };
            here[0].backward(spec.arch, &w.params[lo..hi], &mut grad[lo..hi], x, &mut self.top_grad, dx);
            if l > 0 {
                self.top_grad.copy_from_slice(&self.in_grad[..t * h]);
            }
        }
    }

    pub fn batch_gradient(&mut self, w: &ModelWeights, batch: &[(&[f64], ForceVector)], grad: &mut [f64]) -> Result<BatchStats> {
        let n = batch.len();
        let scale = 2.0 / (OUT_DIM * n) as f64;
        let mut stats = BatchStats {
            count: n,
            ..BatchStats::default()
        };
        for (x, y) in batch {
            if frames_of(&w.spec, x)? != self.frames {
                return Err(Error::Dimension(format!(
                    "batch mixes window lengths ({} frames expected)",
                    self.frames
                )));
            }
            let out = self.forward(w, x);
            let target = y.to_array();
            let mut dy = [0.0; 3];
            for k in 0..OUT_DIM {
                let e = out[k] - target[k];
                stats.sse[k] += e * e;
                dy[k] = scale * e;
            }
            self.backward(w, x, &dy, grad);
        }
        stats.loss = stats.sse.iter().sum::<f64>() / (OUT_DIM * n) as f64;
        if !stats.loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!(
                "{} over a batch of {n}: per-axis sse {:?}",
                w.spec.label(),
                stats.sse
            )));
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests;
