//! Fits the median/IQR scaler on training episodes and shows how an outlier
//! spike barely moves it.

use softtouch::preprocess::{channel_names, fit_columns, fit_scaler, transform, FeatureSet};
use softtouch::sim::{generate_dataset, SweepSpec};

fn main() -> softtouch::Result<()> {
    let spec = SweepSpec {
        pressures: vec![20.0, 40.0],
        offsets_y: vec![0.0],
        offsets_z: vec![0.0],
        ..SweepSpec::default()
    };
    let episodes = generate_dataset(&spec, 1)?;
    let train: Vec<_> = episodes.iter().filter(|e| e.meta.is_train()).collect();
    let scaler = fit_scaler(train.iter().copied())?;
    for (name, (m, q)) in channel_names().iter().zip(scaler.median.iter().zip(&scaler.iqr)).take(4) {
        println!("{name:>14}: median {m:8.4}  iqr {q:8.4}");
    }
    let z = transform(train[0], &scaler, FeatureSet::T4)?;
    println!("T4 features of frame 500: {:?}", z.row(500));

    let mut col: Vec<f64> = (0..101).map(|k| k as f64 * 0.01).collect();
    let clean = fit_columns(&[col.clone()], vec!["x".into()])?;
    col[3] = 1e6;
    let spiked = fit_columns(&[col], vec!["x".into()])?;
    println!(
        "with a 1e6 spike: median {:.3} -> {:.3}, iqr {:.3} -> {:.3}",
        clean.median[0], spiked.median[0], clean.iqr[0], spiked.iqr[0]
    );
    Ok(())
}
