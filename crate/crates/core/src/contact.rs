//! Contact-state classification, friction estimation and scenario replay.
//!
//! A frame is `Noncontact` while the normal force is at or below
//! `contact_eps`. In contact, the friction ratio `F_f / F_n` switches the
//! state to `ContactSlip` once it reaches `mu_threshold` and back to
//! `ContactStick` only after it falls below `mu_threshold - ratio_hysteresis`;
//! inside that band the previous state holds. A Coulomb slider saturates
//! at exactly `mu`, so the slip entry sits at the threshold itself rather
//! than above it.
//!
//! Streams are debounced: a new state is adopted on the `min_dwell`-th
//! consecutive frame that asks for it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::ForceEstimator;
use crate::preprocess::percentile_sorted;
use crate::sim::{derive_seed, simulate_episode, ArtifactConfig, FingerModel, FingerParams, MotionSchedule};
use crate::types::{friction_features_with, ConditionMeta, Episode, ForceVector, Phase, TaxelLayout};

/// Slack on the slip entry so a ratio sitting on the threshold counts.
const THRESHOLD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactStateConfig {
    pub mu_threshold: f64,
    /// Normal force at or below which there is no contact, N.
    pub contact_eps: f64,
    /// Width of the hold band below `mu_threshold`.
    pub ratio_hysteresis: f64,
    /// Consecutive frames needed to change state.
    pub min_dwell: usize,
}

impl Default for ContactStateConfig {
    fn default() -> Self {
        Self {
            mu_threshold: 0.6,
            contact_eps: crate::types::DEFAULT_CONTACT_EPS,
            ratio_hysteresis: 0.05,
            min_dwell: 5,
        }
    }
}

impl ContactStateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_threshold > 0.0) {
            return Err(Error::Config("mu_threshold must be positive".into()));
        }
        if self.min_dwell == 0 {
            return Err(Error::Config("min_dwell must be at least 1".into()));
        }
        if !(self.ratio_hysteresis >= 0.0) || !(self.contact_eps >= 0.0) {
            return Err(Error::Config("ratio_hysteresis and contact_eps must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Noncontact,
    ContactStick,
    ContactSlip,
}

impl StateKind {
    pub fn in_contact(self) -> bool {
        self != StateKind::Noncontact
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StateKind::Noncontact => "noncontact",
            StateKind::ContactStick => "contact_stick",
            StateKind::ContactSlip => "contact_slip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub state: StateKind,
    pub f_n: f64,
    pub f_f: f64,
    pub ratio: Option<f64>,
    /// Ratio inside the hold band; descriptive only.
    pub micro_slip: bool,
}

/// Undebounced state of one frame given the previous state.
pub fn classify_frame(f: ForceVector, cfg: &ContactStateConfig, prev: StateKind) -> ContactState {
    let ff = friction_features_with(f, cfg.contact_eps);
    let lower = cfg.mu_threshold - cfg.ratio_hysteresis;
    let (state, micro_slip) = match ff.ratio {
        None => (StateKind::Noncontact, false),
        Some(r) if r >= cfg.mu_threshold - THRESHOLD_TOLERANCE => (StateKind::ContactSlip, false),
        Some(r) if r < lower => (StateKind::ContactStick, false),
        Some(_) => {
            let held = if prev == StateKind::ContactSlip {
                StateKind::ContactSlip
            } else {
                StateKind::ContactStick
            };
            (held, true)
        }
    };
    ContactState {
        state,
        f_n: ff.f_n,
        f_f: ff.f_f,
        ratio: ff.ratio,
        micro_slip,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ContactOnset,
    SlipOnset,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub kind: EventKind,
    pub frame: usize,
}

/// Debounced streaming classifier; one per force stream.
#[derive(Debug, Clone)]
pub struct StreamClassifier {
    cfg: ContactStateConfig,
    current: Option<StateKind>,
    pending: Option<(StateKind, usize)>,
    frame: usize,
}

impl StreamClassifier {
    pub fn new(cfg: ContactStateConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            current: None,
            pending: None,
            frame: 0,
        })
    }

    /// Classifies the next frame; returns its debounced state and any event.
    pub fn push(&mut self, f: ForceVector) -> (ContactState, Option<ContactEvent>) {
        let frame = self.frame;
        self.frame += 1;
        let prev = self.current.unwrap_or(StateKind::Noncontact);
        let raw = classify_frame(f, &self.cfg, prev);
        let Some(current) = self.current else {
            self.current = Some(raw.state);
            return (raw, None);
        };
        let mut event = None;
        if raw.state == current {
            self.pending = None;
        } else {
            let count = match self.pending {
                Some((s, n)) if s == raw.state => n + 1,
                _ => 1,
            };
            if count >= self.cfg.min_dwell {
                self.current = Some(raw.state);
                self.pending = None;
                event = transition_event(current, raw.state).map(|kind| ContactEvent { kind, frame });
            } else {
                self.pending = Some((raw.state, count));
            }
        }
        let state = ContactState {
            state: self.current.expect("set above"),
            ..raw
        };
        (state, event)
    }
}

fn transition_event(from: StateKind, to: StateKind) -> Option<EventKind> {
    match (from, to) {
        _ if from == to => None,
        (_, StateKind::ContactSlip) => Some(EventKind::SlipOnset),
        (StateKind::Noncontact, StateKind::ContactStick) => Some(EventKind::ContactOnset),
        (_, StateKind::Noncontact) => Some(EventKind::Release),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamClassification {
    pub states: Vec<ContactState>,
    pub events: Vec<ContactEvent>,
}

impl StreamClassification {
    pub fn first(&self, kind: EventKind) -> Option<usize> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.frame)
    }
}

/// Classifies a time-ordered force stream. A stream that starts in slip
/// reports `SlipOnset` at frame 0; one that starts sticking reports
/// `ContactOnset` there.
pub fn classify_stream(forces: &[ForceVector], cfg: &ContactStateConfig) -> Result<StreamClassification> {
    let mut c = StreamClassifier::new(cfg.clone())?;
    let mut states = Vec::with_capacity(forces.len());
    let mut events = Vec::new();
    for (k, &f) in forces.iter().enumerate() {
        let (s, e) = c.push(f);
        if k == 0 {
            if let Some(kind) = transition_event(StateKind::Noncontact, s.state) {
                events.push(ContactEvent { kind, frame: 0 });
            }
        }
        events.extend(e);
        states.push(s);
    }
    Ok(StreamClassification { states, events })
}

/// Expected state of each frame from simulator flags.
pub fn reference_states(episode: &Episode, cfg: &ContactStateConfig) -> Vec<StateKind> {
    episode
        .labels
        .iter()
        .zip(&episode.phases)
        .map(|(f, p)| {
            if f.normal_magnitude() <= cfg.contact_eps {
                StateKind::Noncontact
            } else if p.is_slipping {
                StateKind::ContactSlip
            } else {
                StateKind::ContactStick
            }
        })
        .collect()
}

/// Median friction ratio over forces recorded while slipping.
pub fn friction_coefficient_estimate(forces: &[ForceVector], cfg: &ContactStateConfig) -> Result<f64> {
    let mut ratios: Vec<f64> = forces
        .iter()
        .filter_map(|&f| friction_features_with(f, cfg.contact_eps).ratio)
        .collect();
    if ratios.len() < cfg.min_dwell.max(1) {
        return Err(Error::NoSlip);
    }
    ratios.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&ratios, 0.5))
}

/// Estimate over the frames selected by `slipping`.
pub fn friction_coefficient_masked(forces: &[ForceVector], slipping: &[bool], cfg: &ContactStateConfig) -> Result<f64> {
    if forces.len() != slipping.len() {
        return Err(Error::LengthMismatch {
            what: "slip mask",
            expected: forces.len(),
            actual: slipping.len(),
        });
    }
    let selected: Vec<ForceVector> = forces
        .iter()
        .zip(slipping)
        .filter(|(_, &s)| s)
        .map(|(f, _)| *f)
        .collect();
    friction_coefficient_estimate(&selected, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SlipTest,
    PlugSuccess,
    PlugOverpush,
    PlugMisalign,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::SlipTest,
        Scenario::PlugSuccess,
        Scenario::PlugOverpush,
        Scenario::PlugMisalign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::SlipTest => "slip_test",
            Scenario::PlugSuccess => "plug_success",
            Scenario::PlugOverpush => "plug_overpush",
            Scenario::PlugMisalign => "plug_misalign",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }

    /// Motion of the scenario: a full drag for the slip test; a short
    /// 2 s insertion stroke for the plug cases.
    pub fn schedule(self) -> MotionSchedule {
        let insertion = |travel: f64, push: f64, shift: f64| MotionSchedule {
            move_speed: travel / 2.0,
            move_distance: travel,
            normal_push: push,
            center_shift: shift,
            ..MotionSchedule::default()
        };
        match self {
            Scenario::SlipTest => MotionSchedule::default(),
            Scenario::PlugSuccess => insertion(0.4, 0.2, 0.0),
            Scenario::PlugOverpush => insertion(3.0, 3.0, 0.0),
            Scenario::PlugMisalign => insertion(1.0, 2.0, 6.0),
        }
    }

    pub fn is_plug(self) -> bool {
        self != Scenario::SlipTest
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub contact: ContactStateConfig,
    pub condition: ConditionMeta,
    pub finger: FingerParams,
    pub artifacts: ArtifactConfig,
    /// Excursion threshold, N; calibrated from the success case when unset.
    pub excursion_threshold: Option<f64>,
    pub calibration_seed: u64,
    /// Threshold as a multiple of the calibration success peak.
    pub threshold_factor: f64,
    /// Length of the end-of-settle span used as the force baseline, s.
    pub baseline_s: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            contact: ContactStateConfig::default(),
            condition: ConditionMeta::default(),
            finger: FingerParams::default(),
            artifacts: ArtifactConfig::default(),
            excursion_threshold: None,
            calibration_seed: 0,
            threshold_factor: 3.0,
            baseline_s: 0.5,
        }
    }
}

/// Where the replayed forces come from.
#[derive(Debug, Clone, Copy)]
pub enum ForceSource<'a> {
    GroundTruth,
    Model(&'a ForceEstimator),
}

/// A run of at least `min_dwell` insertion frames whose force deviation
/// exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub start: usize,
    pub end: usize,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlipTiming {
    pub detected: Option<usize>,
    pub truth: Option<usize>,
    pub error_frames: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub source: String,
    pub estimated: Vec<[f64; 3]>,
    pub ground_truth: Vec<[f64; 3]>,
    pub rmse: [f64; 3],
    pub events: Vec<ContactEvent>,
    pub slip_onset: SlipTiming,
    pub excursion_threshold: Option<f64>,
    pub peak_excursion: Option<f64>,
    pub excursions: Vec<Excursion>,
}

/// Simulates the scenario's episode for one seed.
pub fn scenario_episode(scenario: Scenario, cfg: &ReplayConfig, seed: u64) -> Result<Episode> {
    let layout = TaxelLayout::finger();
    let finger = FingerModel::for_condition(&cfg.condition, &cfg.finger, &layout);
    let artifacts = cfg.artifacts.build(derive_seed(seed, scenario as u64));
    simulate_episode(&cfg.condition, &finger, &artifacts, &scenario.schedule(), &layout)
}

fn forces_for(episode: &Episode, source: ForceSource<'_>) -> Result<Vec<ForceVector>> {
    match source {
        ForceSource::GroundTruth => Ok(episode.labels.clone()),
        ForceSource::Model(est) => est.estimate(&episode.frames),
    }
}

/// Deviation of the force magnitude from its end-of-settle mean over the
/// insertion phase; returns `(first insertion frame, deviations)`.
fn insertion_deviation(episode: &Episode, forces: &[ForceVector], cfg: &ReplayConfig) -> Result<(usize, Vec<f64>)> {
    let start = episode.move_onset().ok_or(Error::NoContactPhase)?;
    let end = episode
        .phases
        .iter()
        .position(|p| p.phase == Phase::Released)
        .unwrap_or(episode.len());
    let span = ((cfg.baseline_s / crate::types::SAMPLE_PERIOD).round() as usize).clamp(1, start);
    let base = forces[start - span..start].iter().map(|f| f.norm()).sum::<f64>() / span as f64;
    Ok((start, forces[start..end].iter().map(|f| (f.norm() - base).abs()).collect()))
}

fn excursions(offset: usize, dev: &[f64], threshold: f64, min_dwell: usize) -> Vec<Excursion> {
    let mut out = Vec::new();
    let mut run: Option<(usize, f64)> = None;
    for (k, &d) in dev.iter().chain(std::iter::once(&f64::NEG_INFINITY)).enumerate() {
        match (d > threshold, run) {
            (true, None) => run = Some((k, d)),
            (true, Some((s, p))) => run = Some((s, p.max(d))),
            (false, Some((s, p))) => {
                if k - s >= min_dwell {
                    out.push(Excursion {
                        start: offset + s,
                        end: offset + k - 1,
                        peak: p,
                    });
                }
                run = None;
            }
            (false, None) => {}
        }
    }
    out
}

/// Peak insertion-phase force deviation of the success case on the
/// calibration seed, times `threshold_factor`.
pub fn calibrate_threshold(source: ForceSource<'_>, cfg: &ReplayConfig) -> Result<f64> {
    let ep = scenario_episode(Scenario::PlugSuccess, cfg, cfg.calibration_seed)?;
    let forces = forces_for(&ep, source)?;
    let (_, dev) = insertion_deviation(&ep, &forces, cfg)?;
    let peak = dev.iter().copied().fold(0.0, f64::max);
    Ok(cfg.threshold_factor * peak)
}

/// Runs one scenario end to end: simulate, estimate forces, classify the
/// contact state and, for plug scenarios, detect force excursions.
pub fn replay_scenario(scenario: Scenario, source: ForceSource<'_>, cfg: &ReplayConfig, seed: u64) -> Result<ScenarioReport> {
    cfg.contact.validate()?;
    let ep = scenario_episode(scenario, cfg, seed)?;
    let forces = forces_for(&ep, source)?;
    let stream = classify_stream(&forces, &cfg.contact)?;
    let truth_slip = ep.first_slip();
    let detected = stream.first(EventKind::SlipOnset);
    let slip_onset = SlipTiming {
        detected,
        truth: truth_slip,
        error_frames: detected.zip(truth_slip).map(|(d, t)| d as i64 - t as i64),
    };
    let mut sse = [0.0; 3];
    for (e, t) in forces.iter().zip(&ep.labels) {
        for (k, d) in (*e - *t).to_array().into_iter().enumerate() {
            sse[k] += d * d;
        }
    }
    let n = forces.len().max(1) as f64;
    let (mut threshold, mut peak, mut found) = (None, None, Vec::new());
    if scenario.is_plug() {
        let thr = match cfg.excursion_threshold {
            Some(t) => t,
            None => calibrate_threshold(source, cfg)?,
        };
        let (offset, dev) = insertion_deviation(&ep, &forces, cfg)?;
        peak = Some(dev.iter().copied().fold(0.0, f64::max));
        found = excursions(offset, &dev, thr, cfg.contact.min_dwell);
        threshold = Some(thr);
    }
    Ok(ScenarioReport {
        scenario,
        seed,
        source: match source {
            ForceSource::GroundTruth => "ground_truth".into(),
            ForceSource::Model(e) => e.weights.spec.label(),
        },
        estimated: forces.iter().map(|f| f.to_array()).collect(),
        ground_truth: ep.labels.iter().map(|f| f.to_array()).collect(),
        rmse: sse.map(|s| (s / n).sqrt()),
        events: stream.events,
        slip_onset,
        excursion_threshold: threshold,
        peak_excursion: peak,
        excursions: found,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SensorArtifactModel;

    fn cfg() -> ContactStateConfig {
        ContactStateConfig::default()
    }

    #[test]
    fn zero_force_is_noncontact() {
        let s = classify_frame(ForceVector::ZERO, &cfg(), StateKind::ContactStick);
        assert_eq!(s.state, StateKind::Noncontact);
        assert_eq!(s.ratio, None);
    }

    #[test]
    fn low_ratio_sticks() {
        let s = classify_frame(ForceVector::new(1.0, 4.0, 3.0), &cfg(), StateKind::Noncontact);
        assert_eq!(s.f_n, 5.0);
        assert!((s.ratio.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(s.state, StateKind::ContactStick);
    }

    #[test]
    fn high_ratio_slips_after_dwell() {
        let f = ForceVector::new(4.0, 4.0, 3.0);
        let mut c = StreamClassifier::new(cfg()).unwrap();
        c.push(ForceVector::new(1.0, 4.0, 3.0));
        let mut states = Vec::new();
        for _ in 0..6 {
            states.push(c.push(f).0.state);
        }
        assert_eq!(states[3], StateKind::ContactStick);
        assert_eq!(states[4], StateKind::ContactSlip);
        assert_eq!(states[5], StateKind::ContactSlip);
    }

    #[test]
    fn band_holds_previous_state() {
        let inside = ForceVector::new(0.58, 0.0, 1.0);
        assert_eq!(classify_frame(inside, &cfg(), StateKind::ContactSlip).state, StateKind::ContactSlip);
        let s = classify_frame(inside, &cfg(), StateKind::ContactStick);
        assert_eq!(s.state, StateKind::ContactStick);
        assert!(s.micro_slip);
        // saturated Coulomb ratio enters slip
        let on = ForceVector::new(0.6, 0.0, 1.0);
        assert_eq!(classify_frame(on, &cfg(), StateKind::ContactStick).state, StateKind::ContactSlip);
    }

    #[test]
    fn all_zero_stream_has_no_events() {
        let out = classify_stream(&[ForceVector::ZERO; 50], &cfg()).unwrap();
        assert!(out.events.is_empty());
        assert!(out.states.iter().all(|s| s.state == StateKind::Noncontact));
    }

    #[test]
    fn ratio_below_half_never_slips() {
        let forces: Vec<_> = (0..200)
            .map(|k| ForceVector::new(0.5 * (k as f64 / 200.0), 0.0, 1.0))
            .collect();
        let out = classify_stream(&forces, &cfg()).unwrap();
        assert_eq!(out.first(EventKind::SlipOnset), None);
    }

    #[test]
    fn debounce_rejects_short_glitches() {
        let mut forces = vec![ForceVector::new(0.1, 0.0, 1.0); 40];
        for f in &mut forces[10..14] {
            f.fx = 0.9;
        }
        let out = classify_stream(&forces, &cfg()).unwrap();
        assert!(out.states.iter().all(|s| s.state == StateKind::ContactStick));
        assert_eq!(out.events, vec![ContactEvent { kind: EventKind::ContactOnset, frame: 0 }]);
    }

    #[test]
    fn replay_is_idempotent() {
        let forces: Vec<_> = (0..300)
            .map(|k| ForceVector::new(((k as f64) * 0.05).sin(), 0.2, 1.0))
            .collect();
        assert_eq!(classify_stream(&forces, &cfg()).unwrap(), classify_stream(&forces, &cfg()).unwrap());
    }

    fn noiseless_episode(mu: f64, move_distance: f64) -> Episode {
        let layout = TaxelLayout::finger();
        let meta = ConditionMeta {
            friction_mu: mu,
            ..ConditionMeta::default()
        };
        let finger = FingerModel::for_condition(&meta, &FingerParams::default(), &layout);
        let schedule = MotionSchedule {
            move_distance,
            ..MotionSchedule::default()
        };
        simulate_episode(&meta, &finger, &SensorArtifactModel::identity(), &schedule, &layout).unwrap()
    }

    #[test]
    fn slip_onset_tracks_simulator() {
        let ep = noiseless_episode(0.6, 30.0);
        let out = classify_stream(&ep.labels, &cfg()).unwrap();
        let truth = ep.first_slip().unwrap() as i64;
        let got = out.first(EventKind::SlipOnset).unwrap() as i64;
        assert!((got - truth).abs() <= 10, "{got} vs {truth}");
    }

    #[test]
    fn friction_estimate_recovers_mu() {
        for mu in [0.6, 0.9] {
            let ep = noiseless_episode(mu, 30.0);
            let mask: Vec<bool> = ep.phases.iter().map(|p| p.is_slipping).collect();
            let est = friction_coefficient_masked(&ep.labels, &mask, &cfg()).unwrap();
            assert!((est - mu).abs() < 1e-6, "{est}");
            let scaled: Vec<_> = ep.labels.iter().map(|&f| f * 3.0).collect();
            let est3 = friction_coefficient_masked(&scaled, &mask, &cfg()).unwrap();
            assert!((est3 - est).abs() < 1e-12);
        }
    }

    #[test]
    fn no_slip_is_an_error() {
        let ep = noiseless_episode(0.6, 0.5);
        let mask: Vec<bool> = ep.phases.iter().map(|p| p.is_slipping).collect();
        assert!(matches!(
            friction_coefficient_masked(&ep.labels, &mask, &cfg()),
            Err(Error::NoSlip)
        ));
    }

    #[test]
    fn excursion_runs_need_dwell() {
        let dev = [0.0, 2.0, 2.0, 0.0, 3.0, 3.0, 3.0, 4.0, 3.0, 0.0];
        let ex = excursions(100, &dev, 1.0, 5);
        assert_eq!(ex, vec![Excursion { start: 104, end: 108, peak: 4.0 }]);
    }

    #[test]
    fn ground_truth_plug_scenarios_separate() {
        let cfg = ReplayConfig::default();
        let ok = replay_scenario(Scenario::PlugSuccess, ForceSource::GroundTruth, &cfg, 3).unwrap();
        assert!(ok.excursions.is_empty());
        for sc in [Scenario::PlugOverpush, Scenario::PlugMisalign] {
            let r = replay_scenario(sc, ForceSource::GroundTruth, &cfg, 3).unwrap();
            assert!(!r.excursions.is_empty(), "{sc:?}");
        }
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::parse(s.as_str()).unwrap(), s);
        }
        assert!(Scenario::parse("plug").is_err());
    }
}
