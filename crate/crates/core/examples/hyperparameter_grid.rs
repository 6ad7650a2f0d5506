//! A small architecture x depth x width grid with a resumable ledger; run it
//! twice and the second run is served from the ledger.
//!
//!     cargo run --release --example hyperparameter_grid -- /tmp/grid

use softtouch::experiment::{report, run_grid, GridSpec};
use softtouch::neural::{Arch, TrainConfig};
use softtouch::sim::{generate_dataset, SweepSpec};

fn main() -> softtouch::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "grid".into());
    let spec = SweepSpec {
        pressures: vec![20.0, 40.0],
        offsets_y: vec![0.0],
        offsets_z: vec![0.0],
        ..SweepSpec::default()
    };
    let episodes = generate_dataset(&spec, 0)?;
    let grid = GridSpec {
        archs: vec![Arch::Mlp, Arch::Gru],
        layer_values: vec![1, 2],
        hidden_values: vec![5, 10],
        train: TrainConfig {
            epochs: 5,
            sample_stride: 16,
            val_stride: 4,
            ..TrainConfig::default()
        },
        eval_stride: 4,
        ..GridSpec::default()
    };
    let out = std::path::Path::new(&out);
    std::fs::create_dir_all(out).map_err(|e| softtouch::Error::Config(e.to_string()))?;
    let outcome = run_grid(&grid, &episodes, Some(&out.join("runs.jsonl")))?;
    println!("trained {}, cached {}", outcome.trained, outcome.cached);
    let mut rows = outcome.rows.clone();
    softtouch::experiment::normalize(&mut rows);
    let summary = report(&rows, out)?;
    for r in &rows {
        println!("{:<10} pooled {:.4}  relative {:.3}", r.label(), r.rmse_pooled, r.relative_rmse);
    }
    println!("best: {}", summary.best.label());
    Ok(())
}
