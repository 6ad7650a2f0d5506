//! Trains GRU(1,10) on all channels of a reduced sweep and saves the
//! estimator bundle.
//!
//!     cargo run --release --example train_gru -- /tmp/gru.json

use softtouch::experiment::{prepare, train_cell, Cell};
use softtouch::neural::{evaluate, Arch, TrainConfig};
use softtouch::preprocess::{FeatureSet, DEFAULT_WINDOW};
use softtouch::sim::{generate_dataset, SweepSpec};

fn main() -> softtouch::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "gru.json".into());
    let spec = SweepSpec {
        pressures: vec![10.0, 40.0],
        offsets_z: vec![0.0],
        ..SweepSpec::default()
    };
    let episodes = generate_dataset(&spec, 0)?;
    let data = prepare(&episodes, FeatureSet::T7, DEFAULT_WINDOW)?;
    println!("{} training windows, {} validation windows", data.train.len(), data.validation.len());
    let cell = Cell {
        arch: Arch::Gru,
        layers: 1,
        hidden: 10,
        feature_set: FeatureSet::T7,
        seed: 0,
    };
    let cfg = TrainConfig {
        epochs: 20,
        sample_stride: 32,
        val_stride: 8,
        ..TrainConfig::default()
    };
    let (outcome, est) = train_cell(&cell, &data, &cfg)?;
    for h in outcome.history.iter().step_by(5) {
        println!("epoch {:2}: train {:.4}  val {:.4}", h.epoch, h.train_rmse, h.val_rmse.unwrap_or(f64::NAN));
    }
    let r = evaluate(&est.weights, &data.validation, 1)?;
    println!("best epoch {}: rmse fx {:.4} fy {:.4} fz {:.4} N", outcome.best_epoch, r.rmse[0], r.rmse[1], r.rmse[2]);
    est.save(out.as_ref())?;
    println!("saved {out}");
    Ok(())
}
