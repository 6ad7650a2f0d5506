//! Trains on the non-held-out objects and reports RMSE per object group,
//! including the object never seen in training.

use softtouch::experiment::{eval_by_object, prepare, train_cell, Cell};
use softtouch::neural::{Arch, TrainConfig};
use softtouch::preprocess::{FeatureSet, DEFAULT_WINDOW};
use softtouch::sim::{generate_dataset, SweepSpec};

fn main() -> softtouch::Result<()> {
    let spec = SweepSpec {
        pressures: vec![10.0, 40.0],
        offsets_z: vec![0.0],
        ..SweepSpec::default()
    };
    let episodes = generate_dataset(&spec, 3)?;
    let data = prepare(&episodes, FeatureSet::T7, DEFAULT_WINDOW)?;
    let cell = Cell {
        arch: Arch::Gru,
        layers: 1,
        hidden: 10,
        feature_set: FeatureSet::T7,
        seed: 0,
    };
    let cfg = TrainConfig {
        epochs: 15,
        sample_stride: 32,
        val_stride: 8,
        ..TrainConfig::default()
    };
    let (_, est) = train_cell(&cell, &data, &cfg)?;
    for r in eval_by_object(&est, &episodes, 0, 2)? {
        println!("{:<10?} pooled {:.4} N over {} windows", r.object_group, r.rmse_pooled, r.samples);
    }
    Ok(())
}
