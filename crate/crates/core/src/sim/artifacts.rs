//! Sensor corruption: saturation, play-operator hysteresis, crosstalk,
//! baseline drift, white noise and spike outliers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TAXEL_COUNT;

pub type Crosstalk = [[f64; TAXEL_COUNT]; TAXEL_COUNT];

/// Parameters of the sensor corruption stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorArtifactModel {
    /// Backlash half-width of the play operator, per channel.
    pub play_width: f64,
    /// Saturating nonlinearity `a*f / (1 + b*f)`.
    pub saturation_a: f64,
    pub saturation_b: f64,
    /// Row-normalized taxel mixing matrix.
    pub crosstalk: Crosstalk,
    /// Rate of the exponential baseline drift, 1/s.
    pub drift_rate: f64,
    /// Asymptotic drift offset.
    pub drift_amp: f64,
    pub noise_sigma: f64,
    pub outlier_prob: f64,
    pub seed: u64,
}

impl SensorArtifactModel {
    /// Pass-through configuration: every stage is the identity.
    pub fn identity() -> Self {
        Self {
            play_width: 0.0,
            saturation_a: 1.0,
            saturation_b: 0.0,
            crosstalk: identity_matrix(),
            drift_rate: 0.0,
            drift_amp: 0.0,
            noise_sigma: 0.0,
            outlier_prob: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same artifacts with the stochastic stages switched off.
    pub fn noiseless(mut self) -> Self {
        self.noise_sigma = 0.0;
        self.outlier_prob = 0.0;
        self
    }

    pub fn saturate(&self, f: f64) -> f64 {
        self.saturation_a * f / (1.0 + self.saturation_b * f)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.crosstalk.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("crosstalk row {i} sums to {sum}")));
            }
            if row[i] < 0.65 {
                return Err(Error::Config(format!(
                    "crosstalk diagonal {i} is {} (< 0.65)",
                    row[i]
                )));
            }
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::Config(format!("crosstalk row {i} has negative weight")));
            }
        }
        if !(self.saturation_a > 0.0) || self.saturation_b < 0.0 {
            return Err(Error::Config(
                "saturation needs a > 0 and b >= 0 to stay monotone".into(),
            ));
        }
        if self.play_width < 0.0 || self.noise_sigma < 0.0 || self.drift_rate < 0.0 {
            return Err(Error::Config("negative artifact magnitude".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return Err(Error::Config("outlier_prob outside [0, 1]".into()));
        }
        Ok(())
    }
}

impl Default for SensorArtifactModel {
    fn default() -> Self {
        ArtifactConfig::default().build(0)
    }
}

/// Compact, file-friendly description of a [`SensorArtifactModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactConfig {
    pub play_width: f64,
    pub saturation_a: f64,
    pub saturation_b: f64,
    /// Weight leaked to each immediate neighbour.
    pub crosstalk_adjacent: f64,
    /// Weight leaked to each second neighbour.
    pub crosstalk_second: f64,
    pub drift_rate: f64,
    pub drift_amp: f64,
    pub noise_sigma: f64,
    pub outlier_prob: f64,
}

impl Default for ArtifactConfig {
    fn default() -> Self {
        Self {
            play_width: 0.02,
            saturation_a: 1.0,
            saturation_b: 0.15,
            crosstalk_adjacent: 0.12,
            crosstalk_second: 0.03,
            drift_rate: 0.05,
            drift_amp: 0.03,
            noise_sigma: 0.01,
            outlier_prob: 0.002,
        }
    }
}

impl ArtifactConfig {
    pub fn build(&self, seed: u64) -> SensorArtifactModel {
        SensorArtifactModel {
            play_width: self.play_width,
            saturation_a: self.saturation_a,
            saturation_b: self.saturation_b,
            crosstalk: neighbour_crosstalk(self.crosstalk_adjacent, self.crosstalk_second),
            drift_rate: self.drift_rate,
            drift_amp: self.drift_amp,
            noise_sigma: self.noise_sigma,
            outlier_prob: self.outlier_prob,
            seed,
        }
    }
}

pub fn identity_matrix() -> Crosstalk {
    let mut m = [[0.0; TAXEL_COUNT]; TAXEL_COUNT];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

/// Banded mixing matrix: leak `adjacent` to each direct neighbour and
/// `second` to each neighbour two taxels away; the diagonal takes the rest.
pub fn neighbour_crosstalk(adjacent: f64, second: f64) -> Crosstalk {
    let mut m = [[0.0; TAXEL_COUNT]; TAXEL_COUNT];
    for (i, row) in m.iter_mut().enumerate() {
        let mut off = 0.0;
        for (d, w) in [(1usize, adjacent), (2, second)] {
            if i >= d {
                row[i - d] = w;
                off += w;
            }
            if i + d < TAXEL_COUNT {
                row[i + d] = w;
                off += w;
            }
        }
        row[i] = 1.0 - off;
    }
    m
}

/// Play (backlash) operator: the output moves only when the input leaves
/// the band `[y - width, y + width]` around the current output.
#[derive(Debug, Clone, Copy)]
pub struct PlayOperator {
    width: f64,
    state: Option<f64>,
}

impl PlayOperator {
    pub fn new(width: f64) -> Self {
        Self { width, state: None }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let y = match self.state {
            None => x,
            Some(prev) => prev.clamp(x - self.width, x + self.width),
        };
        self.state = Some(y);
        y
    }
}

/// Noise-free sensor readings for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanSample {
    pub t: f64,
    pub strain: f64,
    /// Per-taxel normal force, N.
    pub taxel_forces: [f64; TAXEL_COUNT],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptedSample {
    pub strain: f64,
    pub taxels: [f64; TAXEL_COUNT],
}

/// Runs the corruption chain over a time-ordered sequence.
///
/// Per channel: saturation, play operator, crosstalk (taxels only), drift,
/// Gaussian noise, then a spike outlier with probability `outlier_prob`.
/// Output is a pure function of the input and `artifacts.seed`.
pub fn corrupt_channels(
    clean: &[CleanSample],
    artifacts: &SensorArtifactModel,
) -> Vec<CorruptedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(artifacts.seed);
    let mut strain_play = PlayOperator::new(artifacts.play_width);
    let mut taxel_play = [PlayOperator::new(artifacts.play_width); TAXEL_COUNT];
    let sigma = artifacts.noise_sigma;

    let mut out = Vec::with_capacity(clean.len());
    for s in clean {
        let strain = strain_play.step(artifacts.saturate(s.strain));
        let mut played = [0.0; TAXEL_COUNT];
        for j in 0..TAXEL_COUNT {
            played[j] = taxel_play[j].step(artifacts.saturate(s.taxel_forces[j]));
        }
        let mut taxels = [0.0; TAXEL_COUNT];
        for (i, row) in artifacts.crosstalk.iter().enumerate() {
            taxels[i] = row.iter().zip(&played).map(|(w, v)| w * v).sum();
        }

        let baseline = if artifacts.drift_rate > 0.0 {
            (1.0 - (-artifacts.drift_rate * s.t).exp()) * artifacts.drift_amp
        } else {
            0.0
        };
        let mut finish = |v: f64| -> f64 {
            let noisy = if sigma > 0.0 {
                let n: f64 = rng.sample(StandardNormal);
                v + baseline + sigma * n
            } else {
                v + baseline
            };
            if artifacts.outlier_prob > 0.0 && rng.random::<f64>() < artifacts.outlier_prob {
                baseline + 10.0 * sigma
            } else {
                noisy
            }
        };
        let strain = finish(strain);
        for v in taxels.iter_mut() {
            *v = finish(*v);
        }
        out.push(CorruptedSample { strain, taxels });
    }
    out
}
