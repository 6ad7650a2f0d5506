//! Classifies a simulated force stream into noncontact / stick / slip and
//! compares the detected slip onset with the simulator.

use softtouch::contact::{classify_stream, ContactStateConfig, EventKind};
use softtouch::sim::{simulate_episode, FingerModel, FingerParams, MotionSchedule, SensorArtifactModel};
use softtouch::types::{ConditionMeta, TaxelLayout};

fn main() -> softtouch::Result<()> {
    let layout = TaxelLayout::finger();
    let meta = ConditionMeta::default();
    let finger = FingerModel::for_condition(&meta, &FingerParams::default(), &layout);
    let ep = simulate_episode(&meta, &finger, &SensorArtifactModel::identity(), &MotionSchedule::default(), &layout)?;

    let cfg = ContactStateConfig::default();
    let out = classify_stream(&ep.labels, &cfg)?;
    for e in &out.events {
        println!("{:>5.2} s  {:?}", ep.frames[e.frame].t, e.kind);
    }
    let detected = out.first(EventKind::SlipOnset);
    println!("slip onset: detected {detected:?}, simulator {:?}", ep.first_slip());
    let micro = out.states.iter().filter(|s| s.micro_slip).count();
    println!("{micro} frames inside the hysteresis band");
    Ok(())
}
