//! Shared domain types: forces, taxel geometry, sensor frames and episodes.
//!
//! Units are fixed across the crate: newtons, kilopascals, millimeters and
//! seconds, all stored as `f64`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of pressure taxels on one finger.
pub const TAXEL_COUNT: usize = 12;

/// Sample period of the sensor stream (100 Hz).
pub const SAMPLE_PERIOD: f64 = 0.01;

/// Default normal-force threshold below which a contact counts as absent.
pub const DEFAULT_CONTACT_EPS: f64 = 0.05;

/// Total force a finger exerts on the object, in newtons.
///
/// `fx` is aligned with the tangential robot motion, `fy`/`fz` span the
/// plane orthogonal to it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ForceVector {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
}

impl ForceVector {
    pub const ZERO: ForceVector = ForceVector {
        fx: 0.0,
        fy: 0.0,
        fz: 0.0,
    };

    pub const fn new(fx: f64, fy: f64, fz: f64) -> Self {
        Self { fx, fy, fz }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.fx, self.fy, self.fz]
    }

    pub fn norm(self) -> f64 {
        (self.fx * self.fx + self.fy * self.fy + self.fz * self.fz).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.fx.is_finite() && self.fy.is_finite() && self.fz.is_finite()
    }

    /// Magnitude of the component orthogonal to the motion axis.
    pub fn normal_magnitude(self) -> f64 {
        self.fy.hypot(self.fz)
    }

    /// Magnitude of the component along the motion axis.
    pub fn friction_magnitude(self) -> f64 {
        self.fx.abs()
    }
}

impl Add for ForceVector {
    type Output = ForceVector;
    fn add(self, rhs: Self) -> Self {
        ForceVector::new(self.fx + rhs.fx, self.fy + rhs.fy, self.fz + rhs.fz)
    }
}

impl AddAssign for ForceVector {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for ForceVector {
    type Output = ForceVector;
    fn sub(self, rhs: Self) -> Self {
        ForceVector::new(self.fx - rhs.fx, self.fy - rhs.fy, self.fz - rhs.fz)
    }
}

impl Neg for ForceVector {
    type Output = ForceVector;
    fn neg(self) -> Self {
        ForceVector::new(-self.fx, -self.fy, -self.fz)
    }
}

impl Mul<f64> for ForceVector {
    type Output = ForceVector;
    fn mul(self, rhs: f64) -> Self {
        ForceVector::new(self.fx * rhs, self.fy * rhs, self.fz * rhs)
    }
}

impl Sum for ForceVector {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ForceVector::ZERO, Add::add)
    }
}

impl fmt::Display for ForceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4}) N", self.fx, self.fy, self.fz)
    }
}

/// Normal force, friction force and their ratio for one force sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionFeatures {
    pub f_n: f64,
    pub f_f: f64,
    /// `f_f / f_n`, or `None` when the normal force is below the contact
    /// threshold.
    pub ratio: Option<f64>,
    /// Sign of the tangential component, kept for direction-aware consumers.
    pub friction_sign: f64,
}

/// Friction features with the default contact threshold of 0.05 N.
pub fn friction_features(f: ForceVector) -> FrictionFeatures {
    friction_features_with(f, DEFAULT_CONTACT_EPS)
}

pub fn friction_features_with(f: ForceVector, contact_eps: f64) -> FrictionFeatures {
    let f_n = f.normal_magnitude();
    let f_f = f.friction_magnitude();
    let ratio = (f_n > contact_eps).then(|| f_f / f_n);
    FrictionFeatures {
        f_n,
        f_f,
        ratio,
        friction_sign: if f.fx < 0.0 { -1.0 } else { 1.0 },
    }
}

/// Component-wise sum of per-finger forces, i.e. the external force on the
/// grasped object.
pub fn sum_finger_forces(forces: &[ForceVector]) -> Result<ForceVector> {
    if forces.is_empty() {
        return Err(Error::NoFingers);
    }
    Ok(forces.iter().copied().sum())
}

/// Per-finger forces and the external force they add up to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspForces {
    pub per_finger: Vec<ForceVector>,
    pub external: ForceVector,
}

impl GraspForces {
    pub fn new(per_finger: Vec<ForceVector>) -> Result<Self> {
        let external = sum_finger_forces(&per_finger)?;
        Ok(Self {
            per_finger,
            external,
        })
    }
}

/// Geometry of the taxel chain along one finger.
///
/// Taxels sit on a circular arc (the curled finger surface) in the y-z plane.
/// `normals[j]` is the outward contact normal of taxel `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxelLayout {
    pub count: usize,
    pub normals: Vec<[f64; 3]>,
    pub positions: Vec<[f64; 3]>,
}

impl TaxelLayout {
    /// Default finger: 12 taxels at 5 mm arc pitch on a 60 mm radius curl.
    pub fn finger() -> Self {
        Self::arc(TAXEL_COUNT, 5.0, 60.0)
    }

    pub fn arc(count: usize, pitch_mm: f64, radius_mm: f64) -> Self {
        let mid = (count as f64 - 1.0) / 2.0;
        let mut normals = Vec::with_capacity(count);
        let mut positions = Vec::with_capacity(count);
        for j in 0..count {
            let theta = (j as f64 - mid) * pitch_mm / radius_mm;
            normals.push([0.0, theta.cos(), theta.sin()]);
            positions.push([0.0, -radius_mm * (1.0 - theta.cos()), radius_mm * theta.sin()]);
        }
        Self {
            count,
            normals,
            positions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.normals.len() != self.count {
            return Err(Error::LengthMismatch {
                what: "taxel normals",
                expected: self.count,
                actual: self.normals.len(),
            });
        }
        if self.positions.len() != self.count {
            return Err(Error::LengthMismatch {
                what: "taxel positions",
                expected: self.count,
                actual: self.positions.len(),
            });
        }
        for (j, n) in self.normals.iter().enumerate() {
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "taxel {j} normal has norm {norm}"
                )));
            }
        }
        Ok(())
    }

    /// Cumulative distance of each taxel along the chain, starting at 0.
    pub fn arc_positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count);
        let mut acc = 0.0;
        for j in 0..self.count {
            if j > 0 {
                let a = self.positions[j - 1];
                let b = self.positions[j];
                acc += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2))
                    .sqrt();
            }
            out.push(acc);
        }
        out
    }

    /// Mean spacing between neighbouring taxels.
    pub fn pitch(&self) -> f64 {
        let arc = self.arc_positions();
        match arc.last() {
            Some(&last) if self.count > 1 => last / (self.count - 1) as f64,
            _ => 0.0,
        }
    }
}

impl Default for TaxelLayout {
    fn default() -> Self {
        Self::finger()
    }
}

/// Normal force reconstructed from taxel forces: `sum_j f_j * n_j`.
pub fn pressure_normal_force(taxel_forces: &[f64], layout: &TaxelLayout) -> Result<ForceVector> {
    if taxel_forces.len() != layout.count || layout.normals.len() != layout.count {
        return Err(Error::LengthMismatch {
            what: "taxel forces",
            expected: layout.count,
            actual: taxel_forces.len(),
        });
    }
    let mut acc = [0.0; 3];
    for (j, (&f, n)) in taxel_forces.iter().zip(&layout.normals).enumerate() {
        if f < 0.0 {
            return Err(Error::TaxelTension { index: j, value: f });
        }
        for k in 0..3 {
            acc[k] += f * n[k];
        }
    }
    Ok(ForceVector::from_array(acc))
}

/// One 100 Hz sample of a finger's sensor suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t: f64,
    /// Commanded pneumatic pressure, kPa.
    pub input_pressure: f64,
    /// Normalized capacitance of the strain sensor.
    pub strain: f64,
    /// Normalized capacitance of each pressure taxel.
    pub taxels: [f64; TAXEL_COUNT],
}

impl SensorFrame {
    /// Channels in canonical order: input pressure, strain, taxel 0..11.
    pub fn channels(&self) -> [f64; CHANNEL_COUNT] {
        let mut out = [0.0; CHANNEL_COUNT];
        out[0] = self.input_pressure;
        out[1] = self.strain;
        out[2..].copy_from_slice(&self.taxels);
        out
    }
}

/// Raw channels per frame: input pressure, strain and the taxels.
pub const CHANNEL_COUNT: usize = 2 + TAXEL_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectShape {
    Convex,
    Concave,
    Square,
}

impl ObjectShape {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectShape::Convex => "convex",
            ObjectShape::Concave => "concave",
            ObjectShape::Square => "square",
        }
    }
}

impl fmt::Display for ObjectShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Experimental condition of one recorded episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMeta {
    pub object_shape: ObjectShape,
    /// Radius (convex/concave) or half-width (square), mm.
    pub object_size: f64,
    pub finger_pressure: f64,
    pub robot_offset_y: f64,
    pub robot_offset_z: f64,
    pub n_fingers: u8,
    pub friction_mu: f64,
    /// 1-3 are training repetitions, 4 is validation.
    pub repetition: u8,
    /// Object never used for training.
    #[serde(default)]
    pub holdout: bool,
}

impl ConditionMeta {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.repetition) {
            return Err(Error::Config(format!(
                "repetition {} outside 1..=4",
                self.repetition
            )));
        }
        if !(self.friction_mu > 0.0) {
            return Err(Error::Config(format!(
                "friction_mu must be positive, got {}",
                self.friction_mu
            )));
        }
        if !(1..=2).contains(&self.n_fingers) {
            return Err(Error::Config(format!(
                "n_fingers must be 1 or 2, got {}",
                self.n_fingers
            )));
        }
        if !(0.0..=60.0).contains(&self.finger_pressure) {
            return Err(Error::Config(format!(
                "finger_pressure {} kPa outside [0, 60]",
                self.finger_pressure
            )));
        }
        if !(self.object_size > 0.0) {
            return Err(Error::Config("object_size must be positive".into()));
        }
        Ok(())
    }

    pub fn is_train(&self) -> bool {
        !self.holdout && self.repetition <= 3
    }

    pub fn is_validation(&self) -> bool {
        !self.holdout && self.repetition == 4
    }
}

impl Default for ConditionMeta {
    fn default() -> Self {
        Self {
            object_shape: ObjectShape::Convex,
            object_size: 30.0,
            finger_pressure: 40.0,
            robot_offset_y: 0.0,
            robot_offset_z: 0.0,
            n_fingers: 1,
            friction_mu: 0.6,
            repetition: 1,
            holdout: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreContact,
    ContactSettle,
    Moving,
    Released,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PreContact => "pre_contact",
            Phase::ContactSettle => "contact_settle",
            Phase::Moving => "moving",
            Phase::Released => "released",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pre_contact" => Phase::PreContact,
            "contact_settle" => Phase::ContactSettle,
            "moving" => Phase::Moving,
            "released" => Phase::Released,
            _ => return None,
        })
    }
}

/// Simulator ground truth attached to every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMark {
    pub phase: Phase,
    pub is_slipping: bool,
}

/// A recorded grasp: sensor frames with their force labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub meta: ConditionMeta,
    pub frames: Vec<SensorFrame>,
    pub labels: Vec<ForceVector>,
    pub phases: Vec<PhaseMark>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Index of the first contact frame (T_c).
    pub fn contact_onset(&self) -> Option<usize> {
        self.phases
            .iter()
            .position(|p| p.phase == Phase::ContactSettle)
    }

    /// Index of the first moving frame (T_m).
    pub fn move_onset(&self) -> Option<usize> {
        self.phases.iter().position(|p| p.phase == Phase::Moving)
    }

    pub fn first_slip(&self) -> Option<usize> {
        self.phases.iter().position(|p| p.is_slipping)
    }

    /// Checks length agreement, uniform 100 Hz timestamps and phase flags.
    pub fn validate(&self) -> Result<()> {
        let n = self.frames.len();
        for (what, len) in [("labels", self.labels.len()), ("phases", self.phases.len())] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        for w in self.frames.windows(2) {
            let dt = w[1].t - w[0].t;
            if (dt - SAMPLE_PERIOD).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "non-uniform sample spacing {dt} at t={}",
                    w[0].t
                )));
            }
        }
        if let Some(i) = self
            .phases
            .iter()
            .position(|p| p.phase == Phase::PreContact && p.is_slipping)
        {
            return Err(Error::Config(format!("pre-contact frame {i} flagged slipping")));
        }
        Ok(())
    }
}
