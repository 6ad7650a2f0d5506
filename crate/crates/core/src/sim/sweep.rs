use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ConditionMeta, Episode, ObjectShape, TaxelLayout};

use super::{
    simulate_episode, simulate_two_finger, ArtifactConfig, FingerModel, FingerParams,
    MotionSchedule,
};

/// One test object of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: ObjectShape,
    /// Radius or half-width, mm.
    pub size: f64,
    /// Excluded from training; used only to test generalization.
    #[serde(default)]
    pub holdout: bool,
}

/// Cartesian data-collection sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub objects: Vec<ObjectSpec>,
    /// Finger pressures, kPa.
    pub pressures: Vec<f64>,
    pub offsets_y: Vec<f64>,
    pub offsets_z: Vec<f64>,
    pub repetitions: u8,
    pub friction_mu: f64,
    pub n_fingers: u8,
    /// Relative standard deviation of the rest indentation between
    /// repetitions of the same condition.
    pub indentation_jitter: f64,
    pub schedule: MotionSchedule,
    pub finger: FingerParams,
    pub artifacts: ArtifactConfig,
}

impl Default for SweepSpec {
    /// Three convex sizes (smallest held out), one concave, one square;
    /// 0-60 kPa; a 3x3 Y/Z offset grid; four repetitions.
    fn default() -> Self {
        Self {
            objects: vec![
                ObjectSpec {
                    shape: ObjectShape::Convex,
                    size: 20.0,
                    holdout: true,
                },
                ObjectSpec {
                    shape: ObjectShape::Convex,
                    size: 30.0,
                    holdout: false,
                },
                ObjectSpec {
                    shape: ObjectShape::Convex,
                    size: 40.0,
                    holdout: false,
                },
                ObjectSpec {
                    shape: ObjectShape::Concave,
                    size: 30.0,
                    holdout: false,
                },
                ObjectSpec {
                    shape: ObjectShape::Square,
                    size: 25.0,
                    holdout: false,
                },
            ],
            pressures: vec![0.0, 20.0, 40.0, 60.0],
            offsets_y: vec![-5.0, 0.0, 5.0],
            offsets_z: vec![-2.0, 0.0, 2.0],
            repetitions: 4,
            friction_mu: 0.6,
            n_fingers: 1,
            indentation_jitter: 0.02,
            schedule: MotionSchedule::default(),
            finger: FingerParams::default(),
            artifacts: ArtifactConfig::default(),
        }
    }
}

impl SweepSpec {
    /// Conditions in generation order: object, pressure, offset Y, offset Z,
    /// repetition.
    pub fn conditions(&self) -> Vec<ConditionMeta> {
        let mut out = Vec::new();
        for obj in &self.objects {
            for &p in &self.pressures {
                for &y in &self.offsets_y {
                    for &z in &self.offsets_z {
                        for rep in 1..=self.repetitions {
                            out.push(ConditionMeta {
                                object_shape: obj.shape,
                                object_size: obj.size,
                                finger_pressure: p,
                                robot_offset_y: y,
                                robot_offset_z: z,
                                n_fingers: self.n_fingers,
                                friction_mu: self.friction_mu,
                                repetition: rep,
                                holdout: obj.holdout,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty()
            || self.pressures.is_empty()
            || self.offsets_y.is_empty()
            || self.offsets_z.is_empty()
            || self.repetitions == 0
        {
            return Err(Error::Empty("sweep"));
        }
        if self.repetitions > 4 {
            return Err(Error::Config("at most 4 repetitions".into()));
        }
        self.schedule.validate()?;
        self.artifacts.build(0).validate()?;
        Ok(())
    }
}

/// SplitMix64 mix of a master seed and a stream index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates every condition of the sweep. The result is a pure function of
/// `(spec, seed)`; each episode draws from its own seed stream so episodes
/// are generated in parallel.
pub fn generate_dataset(spec: &SweepSpec, seed: u64) -> Result<Vec<Episode>> {
    spec.validate()?;
    let layout = TaxelLayout::finger();
    let conditions = spec.conditions();
    let per_condition: Vec<Vec<Episode>> = conditions
        .par_iter()
        .enumerate()
        .map(|(idx, meta)| {
            meta.validate()?;
            let episode_seed = derive_seed(seed, idx as u64);
            let mut finger = FingerModel::for_condition(meta, &spec.finger, &layout);
            if spec.indentation_jitter > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, 0x6a69_7474));
                let n: f64 = StandardNormal.sample(&mut rng);
                finger.rest_indentation *= (1.0 + spec.indentation_jitter * n).max(0.5);
            }
            let artifacts = spec.artifacts.build(episode_seed);
            if spec.n_fingers == 2 {
                let two = simulate_two_finger(meta, &finger, &artifacts, &spec.schedule, &layout)?;
                let [a, b] = two.fingers;
                Ok(vec![a, b])
            } else {
                Ok(vec![simulate_episode(
                    meta,
                    &finger,
                    &artifacts,
                    &spec.schedule,
                    &layout,
                )?])
            }
        })
        .collect::<Result<_>>()?;
    Ok(per_condition.into_iter().flatten().collect())
}
