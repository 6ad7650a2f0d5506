//! Maps the mechanical finger state onto clean strain and taxel forces.

use crate::types::{ForceVector, TaxelLayout, TAXEL_COUNT};

use super::{FingerModel, FingerState};

/// Half-width of the cosine-squared contact patch, in taxel pitches.
const PATCH_HALF_WIDTH_PITCHES: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub strain: f64,
    pub taxel_forces: [f64; TAXEL_COUNT],
    /// Unit direction of `sum_j f_j n_j`; zero when there is no contact.
    pub normal_direction: [f64; 3],
    /// The contact centre fell outside the taxel span and was clamped.
    pub clamped: bool,
}

impl Projection {
    /// Normal force vector carried by the taxels.
    pub fn normal_force(&self, f_n: f64) -> ForceVector {
        ForceVector::from_array(self.normal_direction) * f_n
    }
}

/// Unnormalized patch weights for a contact centred at `center` (arc mm).
pub fn patch_weights(center: f64, layout: &TaxelLayout) -> [f64; TAXEL_COUNT] {
    let half = PATCH_HALF_WIDTH_PITCHES * layout.pitch();
    let mut w = [0.0; TAXEL_COUNT];
    for (j, s) in layout.arc_positions().into_iter().enumerate().take(TAXEL_COUNT) {
        let d = s - center;
        if d.abs() < half {
            let c = (std::f64::consts::FRAC_PI_2 * d / half).cos();
            w[j] = c * c;
        }
    }
    w
}

/// Distributes the normal force over a cosine-squared patch and computes the
/// strain reading from the total finger deflection.
///
/// Taxel forces are scaled so that `pressure_normal_force` returns a vector
/// of magnitude `state.f_n`.
pub fn clean_sensor_projection(
    state: &FingerState,
    finger: &FingerModel,
    layout: &TaxelLayout,
) -> Projection {
    let strain = finger.strain_offset(state.input_pressure)
        + finger.strain_per_indentation * state.indentation
        + finger.strain_per_tangential * state.tangential.abs();

    if state.f_n <= 0.0 {
        return Projection {
            strain,
            taxel_forces: [0.0; TAXEL_COUNT],
            normal_direction: [0.0; 3],
            clamped: false,
        };
    }

    let arc = layout.arc_positions();
    let (lo, hi) = (arc[0], arc[arc.len() - 1]);
    let raw_center = finger.contact_center + state.center_shift;
    let center = raw_center.clamp(lo, hi);
    let clamped = center != raw_center;

    let w = patch_weights(center, layout);
    let mut sum = [0.0; 3];
    for (wj, n) in w.iter().zip(&layout.normals) {
        for k in 0..3 {
            sum[k] += wj * n[k];
        }
    }
    let norm = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt();
    let mut taxel_forces = [0.0; TAXEL_COUNT];
    for (f, wj) in taxel_forces.iter_mut().zip(&w) {
        *f = state.f_n * wj / norm;
    }
    Projection {
        strain,
        taxel_forces,
        normal_direction: [sum[0] / norm, sum[1] / norm, sum[2] / norm],
        clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::FingerParams;
    use crate::types::{pressure_normal_force, ConditionMeta};

    fn state(f_n: f64, shift: f64) -> FingerState {
        FingerState {
            input_pressure: 40.0,
            indentation: 2.0,
            tangential: 0.0,
            f_n,
            center_shift: shift,
        }
    }

    fn finger_with_offset(offset_y: f64) -> FingerModel {
        let meta = ConditionMeta {
            robot_offset_y: offset_y,
            ..ConditionMeta::default()
        };
        FingerModel::for_condition(&meta, &FingerParams::default(), &TaxelLayout::finger())
    }

    #[test]
    fn zero_force_gives_zero_taxels_and_offset_strain() {
        let finger = finger_with_offset(0.0);
        let mut s = state(0.0, 0.0);
        s.indentation = 0.0;
        let p = clean_sensor_projection(&s, &finger, &TaxelLayout::finger());
        assert_eq!(p.taxel_forces, [0.0; TAXEL_COUNT]);
        assert_eq!(p.strain, finger.strain_offset(40.0));
    }

    #[test]
    fn taxels_reproduce_normal_force() {
        let layout = TaxelLayout::finger();
        let finger = finger_with_offset(0.0);
        for &f_n in &[0.3, 2.0, 7.5] {
            for &shift in &[-12.0, -3.3, 0.0, 4.1, 20.0] {
                let p = clean_sensor_projection(&state(f_n, shift), &finger, &layout);
                let fnv = pressure_normal_force(&p.taxel_forces, &layout).unwrap();
                assert!((fnv.norm() - f_n).abs() < 1e-9);
                assert!((fnv - p.normal_force(f_n)).norm() < 1e-9);
                assert_eq!(fnv.fx, 0.0);
            }
        }
    }

    #[test]
    fn patch_centred_on_taxel_five() {
        let layout = TaxelLayout::finger();
        let arc = layout.arc_positions();
        let mut finger = finger_with_offset(0.0);
        finger.contact_center = arc[5];
        let p = clean_sensor_projection(&state(2.0, 0.0), &finger, &layout);
        let dir = p.normal_direction;
        let projected: f64 = p
            .taxel_forces
            .iter()
            .zip(&layout.normals)
            .map(|(f, n)| f * (n[0] * dir[0] + n[1] * dir[1] + n[2] * dir[2]))
            .sum();
        assert!((projected - 2.0).abs() < 1e-12);
        let argmax = (0..TAXEL_COUNT)
            .max_by(|&a, &b| p.taxel_forces[a].total_cmp(&p.taxel_forces[b]))
            .unwrap();
        assert_eq!(argmax, 5);
        let active = p.taxel_forces.iter().filter(|&&f| f > 0.0).count();
        assert!((3..=5).contains(&active));
    }

    #[test]
    fn offset_by_one_pitch_shifts_profile_one_index() {
        let layout = TaxelLayout::finger();
        let pitch = layout.pitch();
        let a = finger_with_offset(0.0);
        let b = finger_with_offset(pitch);
        let s = state(2.0, 0.0);
        let wa = patch_weights(a.contact_center, &layout);
        let wb = patch_weights(b.contact_center, &layout);
        for j in 0..TAXEL_COUNT - 1 {
            assert!((wa[j] - wb[j + 1]).abs() < 1e-9, "index {j}");
        }
        let pa = clean_sensor_projection(&s, &a, &layout);
        let pb = clean_sensor_projection(&s, &b, &layout);
        let peak_a = (0..TAXEL_COUNT).max_by(|&x, &y| pa.taxel_forces[x].total_cmp(&pa.taxel_forces[y]));
        let peak_b = (0..TAXEL_COUNT).max_by(|&x, &y| pb.taxel_forces[x].total_cmp(&pb.taxel_forces[y]));
        assert_eq!(peak_a.unwrap() + 1, peak_b.unwrap());
    }

    #[test]
    fn centre_outside_span_is_clamped() {
        let layout = TaxelLayout::finger();
        let finger = finger_with_offset(0.0);
        let p = clean_sensor_projection(&state(1.0, 500.0), &finger, &layout);
        assert!(p.clamped);
        assert!(p.taxel_forces[TAXEL_COUNT - 1] > 0.0);
    }
}
