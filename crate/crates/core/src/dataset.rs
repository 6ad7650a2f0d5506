//! On-disk dataset layout.
//!
//! A dataset is a directory with one sub-directory per episode
//! (`ep_00000`, `ep_00001`, ...). Each episode directory holds `meta.json`
//! (the [`ConditionMeta`] fields) and `frames.csv`:
//!
//! ```text
//! t,input_pressure,strain,taxel_00,...,taxel_11,fx,fy,fz,phase,is_slipping
//! ```
//!
//! Floats are written as `{:.9e}` (ten significant digits), `phase` as its
//! snake_case name and `is_slipping` as `0`/`1`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{
    ConditionMeta, Episode, ForceVector, Phase, PhaseMark, SensorFrame, SAMPLE_PERIOD,
    TAXEL_COUNT,
};

pub const META_FILE: &str = "meta.json";
pub const FRAMES_FILE: &str = "frames.csv";

pub fn frames_header() -> Vec<String> {
    let mut h = vec!["t".to_string(), "input_pressure".into(), "strain".into()];
    h.extend((0..TAXEL_COUNT).map(|j| format!("taxel_{j:02}")));
    h.extend(["fx", "fy", "fz", "phase", "is_slipping"].map(String::from));
    h
}

pub fn format_float(x: f64) -> String {
    format!("{x:.9e}")
}

fn episode_dir_name(index: usize) -> String {
    format!("ep_{index:05}")
}

pub fn write_episode(dir: &Path, episode: &Episode) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta_path = dir.join(META_FILE);
    let mut meta = serde_json::to_string_pretty(&episode.meta)?;
    meta.push('\n');
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    let frames_path = dir.join(FRAMES_FILE);
    let file = fs::File::create(&frames_path).map_err(|e| Error::io(&frames_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(frames_header())?;
    let mut row: Vec<String> = Vec::with_capacity(3 + TAXEL_COUNT + 5);
    for ((frame, label), mark) in episode
        .frames
        .iter()
        .zip(&episode.labels)
        .zip(&episode.phases)
    {
        row.clear();
        row.push(format_float(frame.t));
        row.push(format_float(frame.input_pressure));
        row.push(format_float(frame.strain));
        row.extend(frame.taxels.iter().map(|&v| format_float(v)));
        row.extend(label.to_array().iter().map(|&v| format_float(v)));
        row.push(mark.phase.as_str().to_string());
        row.push(if mark.is_slipping { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&frames_path, e))?;
    Ok(())
}

pub fn write_dataset(root: &Path, episodes: &[Episode]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    episodes
        .iter()
        .enumerate()
        .map(|(i, ep)| {
            let dir = root.join(episode_dir_name(i));
            write_episode(&dir, ep)?;
            Ok(dir)
        })
        .collect()
}

fn parse_f64(path: &Path, line: usize, column: &str, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Schema {
        path: path.to_path_buf(),
        message: format!("line {line}: column {column}: cannot parse {s:?} as a number"),
    })
}

/// Verifies the header against the expected schema, naming the first
/// missing or misplaced column.
fn check_header(path: &Path, header: &csv::StringRecord) -> Result<()> {
    let expected = frames_header();
    for (i, name) in expected.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == name => {}
            _ => {
                let message = if header.iter().any(|h| h == name) {
                    format!("column {name} out of order")
                } else {
                    format!("missing column {name}")
                };
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message,
                });
            }
        }
    }
    if header.len() != expected.len() {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!(
                "expected {} columns, found {}",
                expected.len(),
                header.len()
            ),
        });
    }
    Ok(())
}

pub fn read_episode(dir: &Path) -> Result<Episode> {
    let meta_path = dir.join(META_FILE);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: ConditionMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Schema {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;

    let (frames, labels, phases) = read_frames(&dir.join(FRAMES_FILE))?;
    Ok(Episode {
        meta,
        frames,
        labels,
        phases,
    })
}

/// Columns of one `frames.csv`.
pub type FrameColumns = (Vec<SensorFrame>, Vec<ForceVector>, Vec<PhaseMark>);

pub fn read_frames(frames_path: &Path) -> Result<FrameColumns> {
    let frames_path = frames_path.to_path_buf();
    let file = fs::File::open(&frames_path).map_err(|e| Error::io(&frames_path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = r.headers()?.clone();
    check_header(&frames_path, &header)?;
    let names = frames_header();

    let mut frames = Vec::new();
    let mut labels = Vec::new();
    let mut phases = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |c: usize| parse_f64(&frames_path, line, &names[c], &rec[c]);
        let mut taxels = [0.0; TAXEL_COUNT];
        for (j, v) in taxels.iter_mut().enumerate() {
            *v = num(3 + j)?;
        }
        frames.push(SensorFrame {
            t: num(0)?,
            input_pressure: num(1)?,
            strain: num(2)?,
            taxels,
        });
        let base = 3 + TAXEL_COUNT;
        labels.push(ForceVector::new(num(base)?, num(base + 1)?, num(base + 2)?));
        let phase = Phase::parse(&rec[base + 3]).ok_or_else(|| Error::Schema {
            path: frames_path.clone(),
            message: format!("line {line}: unknown phase {:?}", &rec[base + 3]),
        })?;
        let is_slipping = match &rec[base + 4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Schema {
                    path: frames_path.clone(),
                    message: format!("line {line}: is_slipping must be 0 or 1, got {other:?}"),
                })
            }
        };
        phases.push(PhaseMark { phase, is_slipping });
    }
    Ok((frames, labels, phases))
}

fn episode_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p.join(META_FILE).exists())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn read_dataset(root: &Path) -> Result<Vec<Episode>> {
    if !root.is_dir() {
        return Err(Error::dataset(root, "dataset directory does not exist"));
    }
    let dirs = episode_dirs(root)?;
    if dirs.is_empty() {
        return Err(Error::dataset(root, "no episode directories"));
    }
    dirs.iter().map(|d| read_episode(d)).collect()
}

/// Outcome of [`validate_dataset`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub episodes: usize,
    pub frames: usize,
    pub train_episodes: usize,
    pub validation_episodes: usize,
    pub holdout_episodes: usize,
    /// One entry per failed check.
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} episodes, {} frames ({} train, {} validation, {} holdout)",
            self.episodes,
            self.frames,
            self.train_episodes,
            self.validation_episodes,
            self.holdout_episodes
        );
        for issue in &self.issues {
            s.push_str("\n  - ");
            s.push_str(issue);
        }
        s
    }
}

/// Checks schema, timestamp uniformity, split flags and holdout presence.
///
/// Per-episode problems are collected rather than returned early so the
/// caller gets an itemized report.
pub fn validate_dataset(root: &Path) -> Result<ValidationReport> {
    if !root.is_dir() {
        return Err(Error::dataset(root, "dataset directory does not exist"));
    }
    let mut report = ValidationReport::default();
    let dirs = episode_dirs(root)?;
    if dirs.is_empty() {
        report.issues.push("no episode directories".into());
        return Ok(report);
    }
    for dir in &dirs {
        let ep = match read_episode(dir) {
            Ok(ep) => ep,
            Err(e) => {
                report.issues.push(e.to_string());
                continue;
            }
        };
        report.episodes += 1;
        report.frames += ep.len();
        if let Err(e) = ep.meta.validate() {
            report.issues.push(format!("{}: {e}", dir.display()));
        }
        if let Err(e) = ep.validate() {
            report.issues.push(format!("{}: {e}", dir.display()));
        }
        if let Some(w) = ep
            .frames
            .windows(2)
            .find(|w| ((w[1].t - w[0].t) - SAMPLE_PERIOD).abs() > 1e-6)
        {
            report.issues.push(format!(
                "{}: timestamps not uniform at t={}",
                dir.display(),
                w[0].t
            ));
        }
        if ep.meta.holdout {
            report.holdout_episodes += 1;
        } else if ep.meta.is_train() {
            report.train_episodes += 1;
        } else if ep.meta.is_validation() {
            report.validation_episodes += 1;
        }
    }
    if report.episodes > 0 {
        if report.train_episodes == 0 {
            report.issues.push("no training split".into());
        }
        if report.validation_episodes == 0 {
            report.issues.push(Error::NoValidationSplit.to_string());
        }
        if report.holdout_episodes == 0 {
            report.issues.push(Error::NoHoldout.to_string());
        }
    }
    Ok(report)
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_dataset, MotionSchedule, SweepSpec};

    fn small() -> Vec<Episode> {
        let spec = SweepSpec {
            pressures: vec![40.0],
            offsets_y: vec![0.0],
            offsets_z: vec![0.0],
            schedule: MotionSchedule {
                move_distance: 2.0,
                ..MotionSchedule::default()
            },
            ..SweepSpec::default()
        };
        generate_dataset(&spec, 5).unwrap()
    }

    #[test]
    fn header_layout() {
        let h = frames_header();
        assert_eq!(h.len(), 3 + 12 + 5);
        assert_eq!(h[3], "taxel_00");
        assert_eq!(h[14], "taxel_11");
        assert_eq!(h.join(","), "t,input_pressure,strain,taxel_00,taxel_01,taxel_02,taxel_03,taxel_04,taxel_05,taxel_06,taxel_07,taxel_08,taxel_09,taxel_10,taxel_11,fx,fy,fz,phase,is_slipping");
    }

    #[test]
    fn floats_carry_ten_significant_digits() {
        assert_eq!(format_float(0.5), "5.000000000e-1");
        assert_eq!(format_float(1.0 / 3.0), "3.333333333e-1");
    }

    #[test]
    fn round_trip_within_print_precision() {
        let eps = small();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &eps).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), eps.len());
        for (a, b) in eps.iter().zip(&back) {
            assert_eq!(a.meta, b.meta);
            assert_eq!(a.phases, b.phases);
            for (fa, fb) in a.labels.iter().zip(&b.labels) {
                assert!((*fa - *fb).norm() <= 1e-9 * (1.0 + fa.norm()));
            }
        }
        let report = validate_dataset(dir.path()).unwrap();
        assert!(report.is_ok(), "{}", report.summary());
        assert_eq!(report.holdout_episodes, 4);
    }

    #[test]
    fn missing_column_is_named() {
        let eps = small();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_dataset(dir.path(), &eps[..1]).unwrap();
        let csv_path = paths[0].join(FRAMES_FILE);
        let text = fs::read_to_string(&csv_path).unwrap();
        let stripped: String = text
            .lines()
            .map(|l| {
                let mut cols: Vec<&str> = l.split(',').collect();
                cols.remove(2);
                cols.join(",") + "\n"
            })
            .collect();
        fs::write(&csv_path, stripped).unwrap();
        let err = read_episode(&paths[0]).unwrap_err();
        assert!(err.to_string().contains("missing column strain"), "{err}");
        let report = validate_dataset(dir.path()).unwrap();
        assert!(report.issues.iter().any(|i| i.contains("strain")));
    }

    #[test]
    fn missing_validation_split_is_reported() {
        let eps: Vec<Episode> = small().into_iter().filter(|e| e.meta.repetition != 4).collect();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &eps).unwrap();
        let report = validate_dataset(dir.path()).unwrap();
        assert!(report.issues.iter().any(|i| i == "no validation split"));
    }
}
