//! Normal force, friction force and their ratio for a few force samples,
//! plus the summed force of a two-finger grasp.

use softtouch::types::{friction_features, sum_finger_forces, ForceVector};

fn main() -> softtouch::Result<()> {
    let samples = [
        ForceVector::new(0.0, 0.0, 0.0),
        ForceVector::new(0.3, 0.0, 1.0),
        ForceVector::new(0.6, 0.6, 0.8),
        ForceVector::new(-0.9, 1.0, 0.0),
    ];
    println!("{:>8} {:>8} {:>8} {:>8}", "fx", "f_n", "f_f", "ratio");
    for f in samples {
        let ff = friction_features(f);
        let ratio = ff.ratio.map_or("-".to_string(), |r| format!("{r:.3}"));
        println!("{:>8.3} {:>8.3} {:>8.3} {:>8}", f.fx, ff.f_n, ff.f_f, ratio);
    }
    let grasp = sum_finger_forces(&[ForceVector::new(0.4, 0.0, 2.0), ForceVector::new(0.4, 0.0, -2.0)])?;
    println!("two-finger sum: {grasp:?}");
    Ok(())
}
