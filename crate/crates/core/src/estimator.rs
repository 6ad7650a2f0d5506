//! A trained model packaged with the preprocessing it expects.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{ModelWeights, Workspace};
use crate::preprocess::{transform_rows, FeatureSet, RobustScalerParams};
use crate::types::{ForceVector, SensorFrame, CHANNEL_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceEstimator {
    pub weights: ModelWeights,
    pub scaler: RobustScalerParams,
    pub feature_set: FeatureSet,
    pub window: usize,
}

impl ForceEstimator {
    pub fn new(weights: ModelWeights, scaler: RobustScalerParams, feature_set: FeatureSet, window: usize) -> Result<Self> {
        let e = Self {
            weights,
            scaler,
            feature_set,
            window,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.window == 0 {
            return Err(Error::Config("estimator window must be at least 1".into()));
        }
        if self.weights.spec.in_dim != self.feature_set.dim() {
            return Err(Error::Dimension(format!(
                "model takes {} inputs but feature set {} has {}",
                self.weights.spec.in_dim,
                self.feature_set,
                self.feature_set.dim()
            )));
        }
        if self.scaler.len() != CHANNEL_COUNT {
            return Err(Error::LengthMismatch {
                what: "scaler channels",
                expected: CHANNEL_COUNT,
                actual: self.scaler.len(),
            });
        }
        Ok(())
    }

    /// One estimate per frame. Frames before a full window is available see
    /// the first frame repeated in place of the missing history.
    pub fn estimate(&self, frames: &[SensorFrame]) -> Result<Vec<ForceVector>> {
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let rows: Vec<[f64; CHANNEL_COUNT]> = frames.iter().map(|f| f.channels()).collect();
        let pad = self.window - 1;
        let padded = std::iter::repeat_n(&rows[0], pad).chain(rows.iter());
        let features = transform_rows(padded, &self.scaler, self.feature_set)?;
        let mut ws = Workspace::new(&self.weights.spec, self.window);
        let out = (0..frames.len())
            .map(|k| ForceVector::from_array(ws.forward(&self.weights, features.rows_ending_at(k + pad, self.window))))
            .collect::<Vec<_>>();
        if let Some(k) = out.iter().position(|f| !f.is_finite()) {
            return Err(Error::NonFiniteLoss(format!("non-finite estimate at frame {k}")));
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::dataset::write_text(path, &serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let e: Self = serde_json::from_str(&text).map_err(|err| Error::Schema {
            path: path.to_path_buf(),
            message: err.to_string(),
        })?;
        e.validate()?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Arch, ModelSpec};
    use crate::preprocess::fit_scaler;
    use crate::sim::{generate_dataset, MotionSchedule, SweepSpec};

    fn bundle(window: usize) -> (ForceEstimator, crate::types::Episode) {
        let spec = SweepSpec {
            objects: vec![SweepSpec::default().objects[1].clone()],
            pressures: vec![20.0],
            offsets_y: vec![0.0],
            offsets_z: vec![0.0],
            repetitions: 1,
            schedule: MotionSchedule {
                move_distance: 2.0,
                ..MotionSchedule::default()
            },
            ..SweepSpec::default()
        };
        let eps = generate_dataset(&spec, 1).unwrap();
        let scaler = fit_scaler(eps.iter()).unwrap();
        let m = ModelSpec::new(Arch::Gru, 1, 3, FeatureSet::T7.dim()).unwrap();
        let w = ModelWeights::xavier(m, 2).unwrap();
        (ForceEstimator::new(w, scaler, FeatureSet::T7, window).unwrap(), eps[0].clone())
    }

    #[test]
    fn estimate_matches_direct_windows() {
        let (est, ep) = bundle(4);
        let out = est.estimate(&ep.frames).unwrap();
        assert_eq!(out.len(), ep.len());
        let feats = crate::preprocess::transform(&ep, &est.scaler, est.feature_set).unwrap();
        let k = 50;
        let direct = est.weights.forward(feats.rows_ending_at(k, 4)).unwrap();
        assert_eq!(out[k], direct);
        // the first frame sees itself repeated
        let first: Vec<f64> = feats.row(0).repeat(4);
        assert_eq!(out[0], est.weights.forward(&first).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let (est, _) = bundle(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        est.save(&path).unwrap();
        assert_eq!(ForceEstimator::load(&path).unwrap(), est);
    }

    #[test]
    fn feature_dimension_checked() {
        let (mut est, _) = bundle(3);
        est.feature_set = FeatureSet::T1;
        assert!(matches!(est.validate(), Err(Error::Dimension(_))));
    }
}
