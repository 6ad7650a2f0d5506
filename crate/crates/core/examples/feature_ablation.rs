//! Trains the same GRU on each of the seven input feature sets.

use softtouch::experiment::{ablate_features, GridSpec};
use softtouch::neural::{Arch, TrainConfig};
use softtouch::sim::{generate_dataset, SweepSpec};

fn main() -> softtouch::Result<()> {
    let spec = SweepSpec {
        pressures: vec![20.0, 40.0],
        offsets_y: vec![0.0],
        offsets_z: vec![0.0],
        ..SweepSpec::default()
    };
    let episodes = generate_dataset(&spec, 0)?;
    let base = GridSpec {
        train: TrainConfig {
            epochs: 8,
            sample_stride: 16,
            val_stride: 4,
            ..TrainConfig::default()
        },
        eval_stride: 4,
        ..GridSpec::default()
    };
    let outcome = ablate_features((Arch::Gru, 1, 10), &base, &episodes, None)?;
    for r in &outcome.rows {
        println!(
            "{}: fx {:.4} fy {:.4} fz {:.4} pooled {:.4}",
            r.feature_set, r.rmse_fx, r.rmse_fy, r.rmse_fz, r.rmse_pooled
        );
    }
    Ok(())
}
