//! Feature selection, robust scaling and sequence windowing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::{ConditionMeta, Episode, ForceVector, CHANNEL_COUNT, TAXEL_COUNT};

/// Channels with an IQR below this are treated as constant and left unscaled.
pub const CONSTANT_IQR: f64 = 1e-12;

/// Default window for recurrent models: 0.2 s at 100 Hz.
pub const DEFAULT_WINDOW: usize = 20;

/// Names of the raw channels in canonical order.
pub fn channel_names() -> Vec<String> {
    let mut names = vec!["input_pressure".to_string(), "strain".to_string()];
    names.extend((0..TAXEL_COUNT).map(|j| format!("taxel_{j:02}")));
    names
}

/// Input-channel combination used by a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Input pressure only.
    T1,
    /// Strain only.
    T2,
    /// Taxels only.
    T3,
    /// Input pressure and strain.
    T4,
    /// Input pressure and taxels.
    T5,
    /// Strain and taxels.
    T6,
    /// Everything.
    T7,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 7] = [
        FeatureSet::T1,
        FeatureSet::T2,
        FeatureSet::T3,
        FeatureSet::T4,
        FeatureSet::T5,
        FeatureSet::T6,
        FeatureSet::T7,
    ];

    fn parts(self) -> (bool, bool, bool) {
        match self {
            FeatureSet::T1 => (true, false, false),
            FeatureSet::T2 => (false, true, false),
            FeatureSet::T3 => (false, false, true),
            FeatureSet::T4 => (true, true, false),
            FeatureSet::T5 => (true, false, true),
            FeatureSet::T6 => (false, true, true),
            FeatureSet::T7 => (true, true, true),
        }
    }

    /// Indices into the canonical channel order
    /// `[input_pressure, strain, taxel_00..taxel_11]`.
    pub fn channels(self) -> Vec<usize> {
        let (pressure, strain, taxels) = self.parts();
        let mut out = Vec::with_capacity(CHANNEL_COUNT);
        if pressure {
            out.push(0);
        }
        if strain {
            out.push(1);
        }
        if taxels {
            out.extend(2..CHANNEL_COUNT);
        }
        out
    }

    pub fn dim(self) -> usize {
        self.channels().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::T1 => "t1",
            FeatureSet::T2 => "t2",
            FeatureSet::T3 => "t3",
            FeatureSet::T4 => "t4",
            FeatureSet::T5 => "t5",
            FeatureSet::T6 => "t6",
            FeatureSet::T7 => "t7",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown feature set {s:?} (expected t1..t7)")))
    }
}

/// Percentile of sorted data with linear interpolation between order
/// statistics (position `q * (n - 1)`).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Per-channel median and interquartile range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScalerParams {
    pub median: Vec<f64>,
    pub iqr: Vec<f64>,
    pub channels: Vec<String>,
}

impl RobustScalerParams {
    pub fn len(&self) -> usize {
        self.median.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median.is_empty()
    }

    pub fn is_constant(&self, channel: usize) -> bool {
        self.iqr[channel] < CONSTANT_IQR
    }

    /// Divisor applied to `channel`; 1 for constant channels.
    pub fn scale(&self, channel: usize) -> f64 {
        if self.is_constant(channel) {
            1.0
        } else {
            self.iqr[channel]
        }
    }

    pub fn scale_value(&self, channel: usize, x: f64) -> f64 {
        (x - self.median[channel]) / self.scale(channel)
    }

    pub fn unscale_value(&self, channel: usize, z: f64) -> f64 {
        z * self.scale(channel) + self.median[channel]
    }

    /// SHA-256 of the serialized parameters, used to prove the validation
    /// pass reused the training-fit scaler.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (m, q) in self.median.iter().zip(&self.iqr) {
            h.update(m.to_le_bytes());
            h.update(q.to_le_bytes());
        }
        for c in &self.channels {
            h.update(c.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

/// Fits median/IQR per column. Every column needs at least 4 samples.
pub fn fit_columns(columns: &[Vec<f64>], names: Vec<String>) -> Result<RobustScalerParams> {
    if columns.is_empty() {
        return Err(Error::Empty("scaler input"));
    }
    if names.len() != columns.len() {
        return Err(Error::LengthMismatch {
            what: "channel names",
            expected: columns.len(),
            actual: names.len(),
        });
    }
    let mut median = Vec::with_capacity(columns.len());
    let mut iqr = Vec::with_capacity(columns.len());
    for (c, col) in columns.iter().enumerate() {
        if col.is_empty() {
            return Err(Error::Empty("scaler input"));
        }
        if col.len() < 4 {
            return Err(Error::Config(format!(
                "channel {} has {} samples; the scaler needs at least 4",
                names[c],
                col.len()
            )));
        }
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        median.push(percentile_sorted(&sorted, 0.5));
        iqr.push(percentile_sorted(&sorted, 0.75) - percentile_sorted(&sorted, 0.25));
    }
    for (name, q) in names.iter().zip(&iqr) {
        if *q < CONSTANT_IQR {
            log::debug!("channel {name} is constant; scale fixed to 1");
        }
    }
    Ok(RobustScalerParams {
        median,
        iqr,
        channels: names,
    })
}

/// Fits the scaler on every raw channel of the given (training) episodes.
pub fn fit_scaler<'a, I>(episodes: I) -> Result<RobustScalerParams>
where
    I: IntoIterator<Item = &'a Episode>,
{
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); CHANNEL_COUNT];
    for ep in episodes {
        for frame in &ep.frames {
            for (col, v) in columns.iter_mut().zip(frame.channels()) {
                col.push(v);
            }
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Empty("training frames"));
    }
    fit_columns(&columns, channel_names())
}

/// Row-major matrix of scaled features, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.data.len() / self.cols
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Rows `end + 1 - len ..= end` as one contiguous slice.
    pub fn rows_ending_at(&self, end: usize, len: usize) -> &[f64] {
        &self.data[(end + 1 - len) * self.cols..(end + 1) * self.cols]
    }
}

/// Scales and selects channels. Output columns follow the canonical order
/// `[input_pressure, strain, taxel_00..taxel_11]` filtered by `fs`.
pub fn transform_rows<'a, I>(rows: I, params: &RobustScalerParams, fs: FeatureSet) -> Result<FeatureMatrix>
where
    I: IntoIterator<Item = &'a [f64; CHANNEL_COUNT]>,
{
    if params.len() != CHANNEL_COUNT {
        return Err(Error::LengthMismatch {
            what: "scaler channels",
            expected: CHANNEL_COUNT,
            actual: params.len(),
        });
    }
    let chans = fs.channels();
    let mut data = Vec::new();
    for row in rows {
        for &c in &chans {
            data.push(params.scale_value(c, row[c]));
        }
    }
    Ok(FeatureMatrix {
        cols: chans.len(),
        data,
    })
}

pub fn transform(episode: &Episode, params: &RobustScalerParams, fs: FeatureSet) -> Result<FeatureMatrix> {
    let rows: Vec<[f64; CHANNEL_COUNT]> = episode.frames.iter().map(|f| f.channels()).collect();
    transform_rows(rows.iter(), params, fs)
}

/// Inverse of [`transform_rows`] for the selected channels.
pub fn inverse_transform(features: &FeatureMatrix, params: &RobustScalerParams, fs: FeatureSet) -> Vec<Vec<f64>> {
    let chans = fs.channels();
    (0..features.rows())
        .map(|i| {
            features
                .row(i)
                .iter()
                .zip(&chans)
                .map(|(&z, &c)| params.unscale_value(c, z))
                .collect()
        })
        .collect()
}

/// Position of one window: episode and index of its last frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowIndex {
    pub episode: usize,
    pub end: usize,
}

/// All stride-1 windows of length `len` over episodes of the given lengths.
/// Episodes shorter than the window are skipped with a warning.
pub fn window_indices(lengths: &[usize], len: usize) -> Result<Vec<WindowIndex>> {
    if len == 0 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    let mut out = Vec::new();
    for (episode, &n) in lengths.iter().enumerate() {
        if n < len {
            log::warn!("episode {episode} has {n} frames, shorter than window {len}; skipped");
            continue;
        }
        out.extend((len - 1..n).map(|end| WindowIndex { episode, end }));
    }
    Ok(out)
}

/// One window borrowed from a feature matrix, labelled with the force at
/// its last frame.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub features: &'a [f64],
    pub label: ForceVector,
}

/// Overlapping stride-1 windows of a single sequence.
pub fn window<'a>(features: &'a FeatureMatrix, labels: &[ForceVector], len: usize) -> Result<Vec<Window<'a>>> {
    if labels.len() != features.rows() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: features.rows(),
            actual: labels.len(),
        });
    }
    Ok(window_indices(&[features.rows()], len)?
        .into_iter()
        .map(|w| Window {
            features: features.rows_ending_at(w.end, len),
            label: labels[w.end],
        })
        .collect())
}

/// A scaled episode ready for windowing.
#[derive(Debug, Clone)]
pub struct PreparedEpisode {
    pub meta: ConditionMeta,
    pub features: FeatureMatrix,
    pub labels: Vec<ForceVector>,
}

/// Scaled episodes plus the index of every window over them.
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub episodes: Vec<PreparedEpisode>,
    pub index: Vec<WindowIndex>,
    pub window: usize,
    pub feature_set: FeatureSet,
    /// Fingerprint of the scaler used to build this set.
    pub scaler_fingerprint: String,
}

impl WindowSet {
    pub fn build<'a, I>(episodes: I, params: &RobustScalerParams, fs: FeatureSet, window: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Episode>,
    {
        let prepared = episodes
            .into_iter()
            .map(|ep| {
                Ok(PreparedEpisode {
                    meta: ep.meta.clone(),
                    features: transform(ep, params, fs)?,
                    labels: ep.labels.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let lengths: Vec<usize> = prepared.iter().map(|p| p.labels.len()).collect();
        let index = window_indices(&lengths, window)?;
        Ok(Self {
            episodes: prepared,
            index,
            window,
            feature_set: fs,
            scaler_fingerprint: params.fingerprint(),
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.feature_set.dim()
    }

    pub fn sample(&self, i: usize) -> Window<'_> {
        let w = self.index[i];
        let ep = &self.episodes[w.episode];
        Window {
            features: ep.features.rows_ending_at(w.end, self.window),
            label: ep.labels[w.end],
        }
    }

    /// Keeps only windows whose position `i` satisfies `i % stride == 0`.
    pub fn decimate(mut self, stride: usize) -> Self {
        if stride > 1 {
            self.index = self
                .index
                .into_iter()
                .enumerate()
                .filter(|(i, _)| i % stride == 0)
                .map(|(_, w)| w)
                .collect();
        }
        self
    }

    /// Keeps only windows from episodes matching `keep`.
    pub fn filter_episodes(&self, keep: impl Fn(&ConditionMeta) -> bool) -> Self {
        let index = self
            .index
            .iter()
            .copied()
            .filter(|w| keep(&self.episodes[w.episode].meta))
            .collect();
        Self {
            episodes: self.episodes.clone(),
            index,
            window: self.window,
            feature_set: self.feature_set,
            scaler_fingerprint: self.scaler_fingerprint.clone(),
        }
    }
}
