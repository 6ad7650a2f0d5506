//! Replays the plug-insertion scenarios on simulator forces and reports the
//! force excursions found at the calibrated threshold.

use softtouch::contact::{calibrate_threshold, replay_scenario, ForceSource, ReplayConfig, Scenario};

fn main() -> softtouch::Result<()> {
    let cfg = ReplayConfig::default();
    let threshold = calibrate_threshold(ForceSource::GroundTruth, &cfg)?;
    println!("calibrated excursion threshold {threshold:.3} N");
    let cfg = ReplayConfig {
        excursion_threshold: Some(threshold),
        ..cfg
    };
    for seed in 1..=3 {
        for sc in [Scenario::PlugSuccess, Scenario::PlugOverpush, Scenario::PlugMisalign] {
            let r = replay_scenario(sc, ForceSource::GroundTruth, &cfg, seed)?;
            println!(
                "seed {seed} {:<14} peak {:.3} N  excursions {}  events {}",
                sc.as_str(),
                r.peak_excursion.unwrap_or(0.0),
                r.excursions.len(),
                r.events.len()
            );
        }
    }
    Ok(())
}
