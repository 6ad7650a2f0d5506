use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AdamState, ModelSpec, ModelWeights, Workspace, OUT_DIM};
use crate::error::{Error, Result};
use crate::preprocess::WindowSet;
use crate::sim::derive_seed;
use crate::types::ForceVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub shuffle_seed: u64,
    pub init_seed: u64,
    /// Each epoch visits one in `sample_stride` training windows, rotating
    /// the phase between epochs.
    pub sample_stride: usize,
    /// Validation RMSE is computed on one in `val_stride` windows.
    pub val_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 50,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            shuffle_seed: 0,
            init_seed: 0,
            sample_stride: 1,
            val_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.sample_stride == 0 || self.val_stride == 0 {
            return Err(Error::Config(
                "batch_size, epochs, sample_stride and val_stride must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_rmse: f64,
    pub val_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    /// Weights at the epoch with the lowest validation RMSE (training RMSE
    /// when there is no validation set).
    pub best: ModelWeights,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub wall_time: f64,
}

/// Per-axis and pooled root-mean-square error, newtons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rmse: [f64; 3],
    pub pooled: f64,
    pub count: usize,
}

impl RmseReport {
    pub fn from_sse(sse: [f64; 3], count: usize) -> Self {
        let n = count.max(1) as f64;
        Self {
            rmse: sse.map(|s| (s / n).sqrt()),
            pooled: (sse.iter().sum::<f64>() / (OUT_DIM as f64 * n)).sqrt(),
            count,
        }
    }

    /// Sum of squared errors per axis, recovered from the RMSE.
    pub fn sse(&self) -> [f64; 3] {
        self.rmse.map(|r| r * r * self.count as f64)
    }

    /// Sample-weighted pool of several reports.
    pub fn pool<'a>(reports: impl IntoIterator<Item = &'a RmseReport>) -> Self {
        let mut sse = [0.0; 3];
        let mut count = 0;
        for r in reports {
            for (a, b) in sse.iter_mut().zip(r.sse()) {
                *a += b;
            }
            count += r.count;
        }
        Self::from_sse(sse, count)
    }
}

/// RMSE of `w` over one in `stride` windows of `set`.
pub fn evaluate(w: &ModelWeights, set: &WindowSet, stride: usize) -> Result<RmseReport> {
    check_dims(&w.spec, set)?;
    let mut ws = Workspace::new(&w.spec, set.window);
    let mut sse = [0.0; 3];
    let mut count = 0;
    for i in (0..set.len()).step_by(stride.max(1)) {
        let s = set.sample(i);
        let out = ws.forward(w, s.features);
        for (k, t) in s.label.to_array().into_iter().enumerate() {
            sse[k] += (out[k] - t).powi(2);
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Empty("evaluation set"));
    }
    let report = RmseReport::from_sse(sse, count);
    if !report.pooled.is_finite() {
        return Err(Error::NonFiniteLoss(format!("evaluation of {}", w.spec.label())));
    }
    Ok(report)
}

fn check_dims(spec: &ModelSpec, set: &WindowSet) -> Result<()> {
    if set.in_dim() != spec.in_dim {
        return Err(Error::Dimension(format!(
            "model expects {} features, data has {} ({})",
            spec.in_dim,
            set.in_dim(),
            set.feature_set
        )));
    }
    Ok(())
}

/// Mini-batch ADAM on shuffled windows. Deterministic given the seeds.
pub fn train(spec: ModelSpec, config: &TrainConfig, train_set: &WindowSet, val_set: Option<&WindowSet>) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_dims(&spec, train_set)?;
    let val_set = val_set.filter(|v| !v.is_empty());
    if let Some(v) = val_set {
        check_dims(&spec, v)?;
        if v.scaler_fingerprint != train_set.scaler_fingerprint {
            return Err(Error::Config(
                "validation windows were scaled with different parameters".into(),
            ));
        }
    }
    let start = Instant::now();
    let mut weights = ModelWeights::xavier(spec, config.init_seed)?;
    let mut adam = AdamState::with_betas(weights.params.len(), config.beta1, config.beta2, config.eps);
    let mut ws = Workspace::new(&spec, train_set.window);
    let mut grad = vec![0.0; weights.params.len()];
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = (f64::INFINITY, weights.clone(), 0);
    let stride = config.sample_stride;
    let mut order: Vec<usize> = Vec::new();
    let mut batch: Vec<(&[f64], ForceVector)> = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        let phase = (epoch * 7) % stride;
        order.clear();
        order.extend((phase..train_set.len()).step_by(stride));
        if order.is_empty() {
            order.extend(0..train_set.len());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.shuffle_seed, epoch as u64));
        order.shuffle(&mut rng);

        let mut sse = [0.0; 3];
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| {
                let s = train_set.sample(i);
                (s.features, s.label)
            }));
            grad.fill(0.0);
            let stats = ws.batch_gradient(&weights, &batch, &mut grad)?;
            for (a, b) in sse.iter_mut().zip(stats.sse) {
                *a += b;
            }
            adam.step(&mut weights.params, &grad, config.learning_rate);
        }
        let train_rmse = RmseReport::from_sse(sse, order.len()).pooled;
        let val_rmse = match val_set {
            Some(v) => Some(evaluate(&weights, v, config.val_stride)?.pooled),
            None => None,
        };
        let score = val_rmse.unwrap_or(train_rmse);
        if score < best.0 {
            best = (score, weights.clone(), epoch);
        }
        log::debug!(
            "{} epoch {}: train {:.5} val {:?}",
            spec.label(),
            epoch + 1,
            train_rmse,
            val_rmse
        );
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_rmse,
            val_rmse,
        });
    }
    Ok(TrainOutcome {
        weights,
        best: best.1,
        best_epoch: best.2 + 1,
        history,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
