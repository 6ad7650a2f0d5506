//! The sensor corruption chain: a play operator on a triangle wave, then the
//! full artifact model applied to a clean pressure pulse.

use softtouch::sim::{corrupt_channels, ArtifactConfig, CleanSample, PlayOperator};
use softtouch::types::TAXEL_COUNT;

fn main() {
    let mut play = PlayOperator::new(0.2);
    let wave: Vec<f64> = (0..=20).chain((0..20).rev()).map(|k| k as f64 * 0.05).collect();
    let out: Vec<f64> = wave.iter().map(|&x| play.step(x)).collect();
    println!("play operator (width 0.2): loading and unloading branches differ");
    for k in [5, 10, 15, 25, 30, 35] {
        println!("  in {:.2} -> out {:.2}", wave[k], out[k]);
    }

    let clean: Vec<CleanSample> = (0..300)
        .map(|k| {
            let load = if (100..200).contains(&k) { 1.5 } else { 0.0 };
            let mut taxel_forces = [0.0; TAXEL_COUNT];
            taxel_forces[5] = load;
            CleanSample {
                t: k as f64 * 0.01,
                strain: 0.2 + 0.1 * load,
                taxel_forces,
            }
        })
        .collect();
    let model = ArtifactConfig::default().build(7);
    let corrupted = corrupt_channels(&clean, &model);
    println!("taxel readings at t = 1.5 s (true load 1.5 N on taxel 5 only):");
    for (j, v) in corrupted[150].taxels.iter().enumerate() {
        println!("  taxel {j:2}: {v:7.4}");
    }
}
