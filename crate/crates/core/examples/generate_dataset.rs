//! Generates a small sweep, writes it in dataset format and validates it.
//!
//!     cargo run --release --example generate_dataset -- /tmp/softtouch-data

use softtouch::dataset::{validate_dataset, write_dataset};
use softtouch::sim::{generate_dataset, SweepSpec};

fn main() -> softtouch::Result<()> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "softtouch-data".into());
    let spec = SweepSpec {
        pressures: vec![20.0, 40.0],
        offsets_y: vec![0.0],
        offsets_z: vec![0.0],
        ..SweepSpec::default()
    };
    let episodes = generate_dataset(&spec, 42)?;
    let dirs = write_dataset(root.as_ref(), &episodes)?;
    println!("wrote {} episodes under {root}", dirs.len());
    let report = validate_dataset(root.as_ref())?;
    println!("{}", report.summary());
    Ok(())
}
