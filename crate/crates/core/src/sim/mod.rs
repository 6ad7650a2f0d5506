//! Soft-finger grasp simulator.
//!
//! One episode follows the friction protocol: pressurize the finger, make
//! contact at `T_c`, settle, then drag the object tangentially (+x) at
//! constant speed starting at `T_m`. The finger is a linear spring in the
//! normal direction and a spring in series with a Coulomb slider in the
//! tangential direction, so the friction force ramps linearly while the
//! contact sticks and saturates at `mu * F_n` once it slips. Kinetic and
//! static coefficients are equal.
//!
//! Ground truth is then projected onto clean strain/taxel readings and
//! corrupted by [`corrupt_channels`].

mod artifacts;
mod projection;
mod sweep;

pub use artifacts::{
    corrupt_channels, identity_matrix, neighbour_crosstalk, ArtifactConfig, CleanSample,
    CorruptedSample, Crosstalk, PlayOperator, SensorArtifactModel,
};
pub use projection::{clean_sensor_projection, patch_weights, Projection};
pub use sweep::{derive_seed, generate_dataset, ObjectSpec, SweepSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    ConditionMeta, Episode, ForceVector, GraspForces, ObjectShape, Phase, PhaseMark, SensorFrame,
    TaxelLayout, SAMPLE_PERIOD,
};

/// Tolerance used when deciding whether the tangential spring has reached
/// the Coulomb limit.
const SLIP_TOLERANCE: f64 = 1e-12;

/// Constants that map a [`ConditionMeta`] onto a [`FingerModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerParams {
    /// Normal stiffness at 0 kPa on the reference object, N/mm.
    pub k_normal_base: f64,
    /// Relative normal stiffening per kPa of finger pressure.
    pub k_normal_per_kpa: f64,
    /// Tangential stiffness on the reference object at zero offset, N/mm.
    pub k_tangent_base: f64,
    /// Relative tangential stiffness change per mm of Y offset.
    pub k_tangent_per_offset_y: f64,
    pub indentation_base: f64,
    pub indentation_per_kpa: f64,
    pub indentation_per_offset_z: f64,
    pub min_indentation: f64,
    /// Object size at which the size factor is 1, mm.
    pub reference_size: f64,
    pub strain_offset_base: f64,
    pub strain_per_kpa: f64,
    pub strain_per_indentation: f64,
    pub strain_per_tangential: f64,
    /// Taxel index the patch is centred on at zero Y offset.
    pub contact_taxel: usize,
}

impl Default for FingerParams {
    fn default() -> Self {
        Self {
            k_normal_base: 0.35,
            k_normal_per_kpa: 0.01,
            k_tangent_base: 0.5,
            k_tangent_per_offset_y: 0.03,
            indentation_base: 3.0,
            indentation_per_kpa: 0.04,
            indentation_per_offset_z: 0.4,
            min_indentation: 0.5,
            reference_size: 30.0,
            strain_offset_base: 0.1,
            strain_per_kpa: 0.006,
            strain_per_indentation: 0.04,
            strain_per_tangential: 0.03,
            contact_taxel: 5,
        }
    }
}

impl FingerParams {
    /// Stiffness multiplier of an object: smaller objects load a shorter,
    /// stiffer part of the finger; concave surfaces wrap it.
    pub fn size_factor(&self, shape: ObjectShape, size: f64) -> f64 {
        let base = (self.reference_size / size).powf(0.25);
        match shape {
            ObjectShape::Convex => base,
            ObjectShape::Concave => 1.25 * base,
            ObjectShape::Square => 0.85 * base,
        }
    }
}

/// Linearized finger for one experimental condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerModel {
    /// Grasp-direction stiffness, N/mm.
    pub k_normal: f64,
    /// Tangential stiffness before slip, N/mm.
    pub k_tangent: f64,
    /// Steady-state indentation after contact, mm.
    pub rest_indentation: f64,
    pub mu: f64,
    /// Arc position of the contact centre, mm.
    pub contact_center: f64,
    pub strain_offset_base: f64,
    pub strain_per_kpa: f64,
    pub strain_per_indentation: f64,
    pub strain_per_tangential: f64,
}

impl FingerModel {
    pub fn for_condition(meta: &ConditionMeta, params: &FingerParams, layout: &TaxelLayout) -> Self {
        let size = params.size_factor(meta.object_shape, meta.object_size);
        let p = meta.finger_pressure;
        let k_normal = params.k_normal_base * (1.0 + params.k_normal_per_kpa * p) * size;
        // Tangential stiffness sees position and object, never pressure or mu.
        let k_tangent = (params.k_tangent_base
            * (1.0 + params.k_tangent_per_offset_y * meta.robot_offset_y)
            * size.sqrt())
        .max(0.05);
        let rest_indentation = (params.indentation_base
            + params.indentation_per_kpa * p
            + params.indentation_per_offset_z * meta.robot_offset_z)
            .max(params.min_indentation);
        let arc = layout.arc_positions();
        let base = arc[params.contact_taxel.min(arc.len() - 1)];
        Self {
            k_normal,
            k_tangent,
            rest_indentation,
            mu: meta.friction_mu,
            contact_center: base + meta.robot_offset_y,
            strain_offset_base: params.strain_offset_base,
            strain_per_kpa: params.strain_per_kpa,
            strain_per_indentation: params.strain_per_indentation,
            strain_per_tangential: params.strain_per_tangential,
        }
    }

    /// Strain reading of the unloaded finger at the given input pressure.
    pub fn strain_offset(&self, input_pressure: f64) -> f64 {
        self.strain_offset_base + self.strain_per_kpa * input_pressure
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_normal > 0.0 && self.k_tangent > 0.0 && self.mu > 0.0) {
            return Err(Error::Config(format!(
                "finger needs positive stiffness and mu (k_n={}, k_t={}, mu={})",
                self.k_normal, self.k_tangent, self.mu
            )));
        }
        Ok(())
    }
}

/// Mechanical state of the finger at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerState {
    pub input_pressure: f64,
    /// Normal indentation, mm.
    pub indentation: f64,
    /// Tangential spring deflection, mm.
    pub tangential: f64,
    /// Normal force magnitude, N.
    pub f_n: f64,
    /// Displacement of the contact centre along the finger, mm.
    pub center_shift: f64,
}

/// Timing of one grasp-and-drag trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSchedule {
    pub dt: f64,
    /// Pressurization before contact; ends at `T_c`.
    pub pressurize_s: f64,
    /// Time for the indentation to build up after contact.
    pub contact_ramp_s: f64,
    /// Delay between contact and motion (`T_m - T_c`).
    pub settle_s: f64,
    /// Tangential robot speed, mm/s.
    pub move_speed: f64,
    /// Tangential travel, mm.
    pub move_distance: f64,
    /// Extra indentation built up linearly over the move, mm.
    pub normal_push: f64,
    /// Contact-centre displacement built up linearly over the move, mm.
    pub center_shift: f64,
    /// Unloading time after the move.
    pub release_s: f64,
}

impl Default for MotionSchedule {
    fn default() -> Self {
        Self {
            dt: SAMPLE_PERIOD,
            pressurize_s: 1.0,
            contact_ramp_s: 0.2,
            settle_s: 2.0,
            move_speed: 2.0,
            move_distance: 30.0,
            normal_push: 0.0,
            center_shift: 0.0,
            release_s: 1.0,
        }
    }
}

impl MotionSchedule {
    fn frames(&self, seconds: f64) -> usize {
        (seconds / self.dt).round().max(0.0) as usize
    }

    pub fn move_duration(&self) -> f64 {
        if self.move_speed > 0.0 {
            self.move_distance / self.move_speed
        } else {
            0.0
        }
    }

    /// Frame counts of the four phases.
    pub fn phase_frames(&self) -> [usize; 4] {
        [
            self.frames(self.pressurize_s),
            self.frames(self.settle_s),
            self.frames(self.move_duration()),
            self.frames(self.release_s),
        ]
    }

    pub fn total_frames(&self) -> usize {
        self.phase_frames().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.move_speed < 0.0 || self.move_distance < 0.0 {
            return Err(Error::Config("negative motion".into()));
        }
        let [_, settle, moving, _] = self.phase_frames();
        if settle + moving == 0 {
            return Err(Error::NoContactPhase);
        }
        Ok(())
    }
}

/// Clean per-frame output of the mechanical model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthFrame {
    pub t: f64,
    pub state: FingerState,
    pub force: ForceVector,
    pub mark: PhaseMark,
}

/// Runs the stick/slip mechanics without any sensor model.
pub fn simulate_mechanics(
    meta: &ConditionMeta,
    finger: &FingerModel,
    schedule: &MotionSchedule,
    layout: &TaxelLayout,
) -> Result<(Vec<GroundTruthFrame>, Vec<Projection>)> {
    schedule.validate()?;
    finger.validate()?;
    let [n_pre, n_settle, n_move, n_release] = schedule.phase_frames();
    let k_contact = n_pre;
    let k_move = k_contact + n_settle;
    let k_release = k_move + n_move;
    let n = k_release + n_release;
    let dt = schedule.dt;
    let p_target = meta.finger_pressure;
    let pressurize_ramp = (0.5 * schedule.pressurize_s).max(dt);
    let contact_ramp = schedule.contact_ramp_s.max(dt);

    let mut truth = Vec::with_capacity(n);
    let mut projections = Vec::with_capacity(n);
    let mut anchor = 0.0;
    let mut tangential_at_release = 0.0;
    let mut clamped_frames = 0usize;

    for k in 0..n {
        let t = k as f64 * dt;
        let phase = if k < k_contact {
            Phase::PreContact
        } else if k < k_move {
            Phase::ContactSettle
        } else if k < k_release {
            Phase::Moving
        } else {
            Phase::Released
        };
        // Unloading fraction, 1 until the release phase.
        let unload = if phase == Phase::Released {
            1.0 - (k - k_release + 1) as f64 / n_release as f64
        } else {
            1.0
        };
        let input_pressure = match phase {
            Phase::PreContact => p_target * (((k + 1) as f64 * dt) / pressurize_ramp).min(1.0),
            _ => p_target * unload,
        };
        let contact_level = if k < k_contact {
            0.0
        } else {
            (((k - k_contact + 1) as f64 * dt) / contact_ramp).min(1.0)
        };
        let move_progress = if k < k_move {
            0.0
        } else if n_move == 0 {
            1.0
        } else {
            (((k - k_move) as f64) / n_move as f64).min(1.0)
        };
        let robot_tangential = if k < k_move {
            0.0
        } else if k < k_release {
            schedule.move_speed * ((k - k_move) as f64 * dt)
        } else {
            schedule.move_speed * ((n_move.saturating_sub(1)) as f64 * dt)
        };

        let indentation = (finger.rest_indentation * contact_level
            + schedule.normal_push * move_progress)
            * unload;
        let f_n = finger.k_normal * indentation;

        let trial = if phase == Phase::Released {
            tangential_at_release * unload
        } else {
            robot_tangential - anchor
        };
        let limit = finger.mu * f_n;
        let (tangential, slipping) = if f_n <= 0.0 {
            (0.0, false)
        } else if finger.k_tangent * trial.abs() >= limit - SLIP_TOLERANCE {
            (trial.signum() * limit / finger.k_tangent, true)
        } else {
            (trial, false)
        };
        if phase != Phase::Released {
            anchor = robot_tangential - tangential;
            tangential_at_release = tangential;
        }

        let state = FingerState {
            input_pressure,
            indentation,
            tangential,
            f_n,
            center_shift: schedule.center_shift * move_progress,
        };
        let projection = clean_sensor_projection(&state, finger, layout);
        if projection.clamped {
            clamped_frames += 1;
        }
        let normal = projection.normal_force(f_n);
        let force = ForceVector::new(finger.k_tangent * tangential, normal.fy, normal.fz);
        truth.push(GroundTruthFrame {
            t,
            state,
            force,
            mark: PhaseMark {
                phase,
                is_slipping: slipping,
            },
        });
        projections.push(projection);
    }
    if clamped_frames > 0 {
        log::warn!(
            "contact centre outside taxel span on {clamped_frames} frames (offset_y={}), clamped to nearest taxel",
            meta.robot_offset_y
        );
    }
    Ok((truth, projections))
}

/// Simulates one single-finger episode with corrupted sensor readings.
pub fn simulate_episode(
    meta: &ConditionMeta,
    finger: &FingerModel,
    artifacts: &SensorArtifactModel,
    schedule: &MotionSchedule,
    layout: &TaxelLayout,
) -> Result<Episode> {
    let (truth, projections) = simulate_mechanics(meta, finger, schedule, layout)?;
    let clean: Vec<CleanSample> = truth
        .iter()
        .zip(&projections)
        .map(|(g, p)| CleanSample {
            t: g.t,
            strain: p.strain,
            taxel_forces: p.taxel_forces,
        })
        .collect();
    let corrupted = corrupt_channels(&clean, artifacts);
    let frames = truth
        .iter()
        .zip(&corrupted)
        .map(|(g, c)| SensorFrame {
            t: g.t,
            input_pressure: g.state.input_pressure,
            strain: c.strain,
            taxels: c.taxels,
        })
        .collect();
    Ok(Episode {
        meta: meta.clone(),
        frames,
        labels: truth.iter().map(|g| g.force).collect(),
        phases: truth.iter().map(|g| g.mark).collect(),
    })
}

/// Two opposing fingers dragging the same object.
#[derive(Debug, Clone)]
pub struct TwoFingerEpisode {
    pub fingers: [Episode; 2],
    /// Per-frame finger forces and their sum.
    pub grasp: Vec<GraspForces>,
}

/// Two mirrored single-finger simulations sharing the object motion.
///
/// Each finger carries half the normal stiffness; the second finger's
/// grasp-direction force is mirrored, so the normal components largely
/// cancel in the external sum while the friction components add.
pub fn simulate_two_finger(
    meta: &ConditionMeta,
    finger: &FingerModel,
    artifacts: &SensorArtifactModel,
    schedule: &MotionSchedule,
    layout: &TaxelLayout,
) -> Result<TwoFingerEpisode> {
    let mut half = finger.clone();
    half.k_normal *= 0.5;
    let meta = ConditionMeta {
        n_fingers: 2,
        ..meta.clone()
    };
    let first = simulate_episode(&meta, &half, artifacts, schedule, layout)?;
    let mut second_artifacts = artifacts.clone();
    second_artifacts.seed = derive_seed(artifacts.seed, 1);
    let mut second = simulate_episode(&meta, &half, &second_artifacts, schedule, layout)?;
    for f in &mut second.labels {
        f.fy = -f.fy;
    }
    let grasp = first
        .labels
        .iter()
        .zip(&second.labels)
        .map(|(a, b)| GraspForces::new(vec![*a, *b]))
        .collect::<Result<Vec<_>>>()?;
    Ok(TwoFingerEpisode {
        fingers: [first, second],
        grasp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{friction_features, pressure_normal_force};

    fn simple_finger() -> FingerModel {
        FingerModel {
            k_normal: 1.0,
            k_tangent: 0.5,
            rest_indentation: 3.0,
            mu: 0.6,
            contact_center: TaxelLayout::finger().arc_positions()[5],
            strain_offset_base: 0.1,
            strain_per_kpa: 0.006,
            strain_per_indentation: 0.04,
            strain_per_tangential: 0.03,
        }
    }

    fn run(finger: &FingerModel, schedule: &MotionSchedule) -> Episode {
        simulate_episode(
            &ConditionMeta::default(),
            finger,
            &SensorArtifactModel::identity(),
            schedule,
            &TaxelLayout::finger(),
        )
        .unwrap()
    }

    #[test]
    fn slip_onset_matches_closed_form() {
        // F_n = 3 N, mu = 0.6, k_t = 0.5 N/mm, 2 mm/s: slip at 3.6 mm, 1.8 s after T_m.
        let ep = run(&simple_finger(), &MotionSchedule::default());
        let t_m = ep.move_onset().unwrap();
        let expected = ((ep.frames[t_m].t + 1.8) / 0.01).round() as usize;
        assert_eq!(ep.first_slip(), Some(expected));
        assert!((ep.labels[t_m + 100].normal_magnitude() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn slipping_frames_sit_on_the_friction_cone() {
        let ep = run(&simple_finger(), &MotionSchedule::default());
        let mut slipping = 0;
        for (f, m) in ep.labels.iter().zip(&ep.phases) {
            let ff = friction_features(*f);
            assert!(ff.f_f <= 0.6 * ff.f_n + 1e-9);
            if m.is_slipping {
                slipping += 1;
                assert!((ff.f_f / ff.f_n - 0.6).abs() < 1e-9);
            } else if ff.f_n > 0.0 {
                assert!(ff.f_f < 0.6 * ff.f_n);
            }
        }
        assert!(slipping > 1000);
    }

    #[test]
    fn pre_contact_is_force_free() {
        let ep = run(&simple_finger(), &MotionSchedule::default());
        let t_c = ep.contact_onset().unwrap();
        assert_eq!(t_c, 100);
        for k in 0..t_c {
            assert_eq!(ep.labels[k], ForceVector::ZERO);
            assert!(!ep.phases[k].is_slipping);
            assert!(ep.frames[k].taxels.iter().all(|&v| v == 0.0));
        }
        assert!(ep.labels[t_c].normal_magnitude() > 0.0);
        assert_eq!(ep.move_onset(), Some(t_c + 200));
    }

    #[test]
    fn stick_phase_slope() {
        let finger = simple_finger();
        let ep = run(&finger, &MotionSchedule::default());
        let t_m = ep.move_onset().unwrap();
        for k in t_m..t_m + 150 {
            assert!(!ep.phases[k + 1].is_slipping);
            let slope = (ep.labels[k + 1].fx - ep.labels[k].fx) / 0.01;
            assert!((slope - finger.k_tangent * 2.0).abs() < 1e-6, "slope {slope} at {k}");
        }
    }

    #[test]
    fn release_returns_to_noncontact() {
        let ep = run(&simple_finger(), &MotionSchedule::default());
        let last = ep.labels.last().unwrap();
        assert_eq!(last.norm(), 0.0);
        assert!(!ep.phases.last().unwrap().is_slipping);
        assert_eq!(ep.len(), 1900);
        ep.validate().unwrap();
    }

    #[test]
    fn zero_contact_duration_is_rejected() {
        let schedule = MotionSchedule {
            settle_s: 0.0,
            move_distance: 0.0,
            ..MotionSchedule::default()
        };
        let err = simulate_episode(
            &ConditionMeta::default(),
            &simple_finger(),
            &SensorArtifactModel::identity(),
            &schedule,
            &TaxelLayout::finger(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoContactPhase));
    }

    #[test]
    fn clean_taxels_reconstruct_normal_force() {
        let layout = TaxelLayout::finger();
        let ep = run(&simple_finger(), &MotionSchedule::default());
        for (frame, label) in ep.frames.iter().zip(&ep.labels) {
            let fnv = pressure_normal_force(&frame.taxels, &layout).unwrap();
            assert!((fnv.fy - label.fy).abs() < 1e-9);
            assert!((fnv.fz - label.fz).abs() < 1e-9);
        }
    }

    #[test]
    fn tangential_stiffness_ignores_pressure_and_mu() {
        let params = FingerParams::default();
        let layout = TaxelLayout::finger();
        let a = FingerModel::for_condition(&ConditionMeta::default(), &params, &layout);
        let b = FingerModel::for_condition(
            &ConditionMeta {
                finger_pressure: 0.0,
                friction_mu: 0.9,
                ..ConditionMeta::default()
            },
            &params,
            &layout,
        );
        assert_eq!(a.k_tangent, b.k_tangent);
        assert!(a.k_normal > b.k_normal);
        let c = FingerModel::for_condition(
            &ConditionMeta {
                robot_offset_y: 5.0,
                ..ConditionMeta::default()
            },
            &params,
            &layout,
        );
        assert_ne!(a.k_tangent, c.k_tangent);
    }

    #[test]
    fn two_fingers_amplify_friction_and_cancel_normal() {
        let meta = ConditionMeta::default();
        let layout = TaxelLayout::finger();
        let finger = FingerModel::for_condition(&meta, &FingerParams::default(), &layout);
        let two = simulate_two_finger(
            &meta,
            &finger,
            &SensorArtifactModel::identity(),
            &MotionSchedule::default(),
            &layout,
        )
        .unwrap();
        let k = two.fingers[0].move_onset().unwrap() + 1000;
        let g = &two.grasp[k];
        let ext = friction_features(g.external);
        let single = friction_features(g.per_finger[0]);
        assert!(ext.f_f > 1.9 * single.f_f);
        assert!(ext.f_n < single.f_n);
        for g in &two.grasp {
            let sum: ForceVector = g.per_finger.iter().copied().sum();
            assert!((sum - g.external).norm() < 1e-9);
        }
    }
}
