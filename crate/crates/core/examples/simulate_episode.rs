//! One grasp-and-drag trial: prints force labels around the stick/slip
//! transition.

use softtouch::sim::{simulate_episode, FingerModel, FingerParams, MotionSchedule, SensorArtifactModel};
use softtouch::types::{friction_features, ConditionMeta, TaxelLayout};

fn main() -> softtouch::Result<()> {
    let layout = TaxelLayout::finger();
    let meta = ConditionMeta::default();
    let finger = FingerModel::for_condition(&meta, &FingerParams::default(), &layout);
    let ep = simulate_episode(&meta, &finger, &SensorArtifactModel::identity(), &MotionSchedule::default(), &layout)?;

    let onset = ep.move_onset().expect("schedule has a move phase");
    let slip = ep.first_slip().expect("30 mm of travel slips");
    println!(
        "k_t {:.3} N/mm, mu {}: move at frame {onset}, slip at frame {slip} ({:.2} s later)",
        finger.k_tangent,
        finger.mu,
        (slip - onset) as f64 * 0.01
    );
    for k in (onset..slip + 40).step_by(20) {
        let f = ep.labels[k];
        let ff = friction_features(f);
        println!(
            "t {:5.2}  F {:6.3} {:6.3} {:6.3}  ratio {:.3}  {:?} slipping={}",
            ep.frames[k].t,
            f.fx,
            f.fy,
            f.fz,
            ff.ratio.unwrap_or(0.0),
            ep.phases[k].phase,
            ep.phases[k].is_slipping
        );
    }
    Ok(())
}
