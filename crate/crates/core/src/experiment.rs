//! Hyperparameter grid, feature ablation and per-object evaluation.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::ForceEstimator;
use crate::neural::{evaluate, train, Arch, ModelSpec, RmseReport, TrainConfig, TrainOutcome};
use crate::preprocess::{fit_scaler, FeatureSet, RobustScalerParams, WindowSet, DEFAULT_WINDOW};
use crate::sim::derive_seed;
use crate::types::{Episode, ObjectShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub archs: Vec<Arch>,
    pub layer_values: Vec<usize>,
    pub hidden_values: Vec<usize>,
    pub feature_sets: Vec<FeatureSet>,
    pub seeds: Vec<u64>,
    /// Dataset directory; only read by the command line.
    pub dataset: Option<PathBuf>,
    pub window: usize,
    pub train: TrainConfig,
    /// Validation windows are evaluated one in `eval_stride`.
    pub eval_stride: usize,
    /// Worker threads; all logical cores when unset.
    pub jobs: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            archs: Arch::ALL.to_vec(),
            layer_values: vec![1, 5, 10],
            hidden_values: vec![1, 5, 10],
            feature_sets: vec![FeatureSet::T7],
            seeds: vec![0],
            dataset: None,
            window: DEFAULT_WINDOW,
            train: TrainConfig::default(),
            eval_stride: 1,
            jobs: None,
        }
    }
}

/// One trained configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
    pub feature_set: FeatureSet,
    pub seed: u64,
}

impl Cell {
    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.arch, self.layers, self.hidden, self.feature_set.dim())
    }

    /// Training config with seeds derived from the cell seed.
    pub fn train_config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            shuffle_seed: derive_seed(self.seed, 1),
            init_seed: derive_seed(self.seed, 2),
            ..base.clone()
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.archs.is_empty()
            || self.layer_values.is_empty()
            || self.hidden_values.is_empty()
            || self.feature_sets.is_empty()
            || self.seeds.is_empty()
        {
            return Err(Error::Empty("grid axis"));
        }
        if self.window == 0 || self.eval_stride == 0 {
            return Err(Error::Config("window and eval_stride must be positive".into()));
        }
        self.train.validate()
    }

    /// Cartesian product in arch, layers, hidden, feature set, seed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &arch in &self.archs {
            for &layers in &self.layer_values {
                for &hidden in &self.hidden_values {
                    for &feature_set in &self.feature_sets {
                        for &seed in &self.seeds {
                            out.push(Cell {
                                arch,
                                layers,
                                hidden,
                                feature_set,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectGroup {
    Convex,
    Concave,
    Square,
    Untrained,
    All,
}

impl ObjectGroup {
    fn of_shape(shape: ObjectShape) -> Self {
        match shape {
            ObjectShape::Convex => ObjectGroup::Convex,
            ObjectShape::Concave => ObjectGroup::Concave,
            ObjectShape::Square => ObjectGroup::Square,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
    pub feature_set: FeatureSet,
    pub object_group: ObjectGroup,
    pub rmse_fx: f64,
    pub rmse_fy: f64,
    pub rmse_fz: f64,
    pub rmse_pooled: f64,
    pub relative_rmse: f64,
    pub seed: u64,
    pub wall_time: f64,
    pub params: usize,
    pub samples: usize,
}

impl ResultRow {
    fn new(cell: &Cell, group: ObjectGroup, r: &RmseReport, wall_time: f64) -> Result<Self> {
        Ok(Self {
            arch: cell.arch,
            layers: cell.layers,
            hidden: cell.hidden,
            feature_set: cell.feature_set,
            object_group: group,
            rmse_fx: r.rmse[0],
            rmse_fy: r.rmse[1],
            rmse_fz: r.rmse[2],
            rmse_pooled: r.pooled,
            relative_rmse: 1.0,
            seed: cell.seed,
            wall_time,
            params: cell.model_spec()?.param_count(),
            samples: r.count,
        })
    }

    pub fn report(&self) -> RmseReport {
        RmseReport {
            rmse: [self.rmse_fx, self.rmse_fy, self.rmse_fz],
            pooled: self.rmse_pooled,
            count: self.samples,
        }
    }

    pub fn label(&self) -> String {
        format!("{}({},{}) {}", self.arch, self.layers, self.hidden, self.feature_set)
    }
}

/// Sets `relative_rmse = rmse_pooled / max(rmse_pooled)`.
pub fn normalize(rows: &mut [ResultRow]) {
    let max = rows.iter().map(|r| r.rmse_pooled).fold(0.0, f64::max);
    for r in rows {
        r.relative_rmse = if max > 0.0 { r.rmse_pooled / max } else { 1.0 };
    }
}

/// Lowest pooled RMSE; ties go to fewer parameters, then arch name.
pub fn best_row(rows: &[ResultRow]) -> Option<&ResultRow> {
    rows.iter().min_by(|a, b| {
        a.rmse_pooled
            .total_cmp(&b.rmse_pooled)
            .then(a.params.cmp(&b.params))
            .then(a.arch.as_str().cmp(b.arch.as_str()))
    })
}

/// SHA-256 over metadata, frames and labels of every episode.
pub fn dataset_fingerprint(episodes: &[Episode]) -> Result<String> {
    let mut h = Sha256::new();
    for ep in episodes {
        h.update(serde_json::to_vec(&ep.meta)?);
        for f in &ep.frames {
            for v in f.channels() {
                h.update(v.to_le_bytes());
            }
        }
        for l in &ep.labels {
            for v in l.to_array() {
                h.update(v.to_le_bytes());
            }
        }
    }
    Ok(hex::encode(h.finalize()))
}

/// Train (reps 1-3), validation (rep 4) and holdout episodes.
pub struct Split<'a> {
    pub train: Vec<&'a Episode>,
    pub validation: Vec<&'a Episode>,
    pub holdout: Vec<&'a Episode>,
}

pub fn split(episodes: &[Episode]) -> Split<'_> {
    Split {
        train: episodes.iter().filter(|e| e.meta.is_train()).collect(),
        validation: episodes.iter().filter(|e| e.meta.is_validation()).collect(),
        holdout: episodes.iter().filter(|e| e.meta.holdout).collect(),
    }
}

/// Training and validation windows for one feature set, scaled with
/// parameters fitted on the training split only.
pub struct PreparedData {
    pub scaler: RobustScalerParams,
    pub train: WindowSet,
    pub validation: WindowSet,
}

pub fn prepare(episodes: &[Episode], fs: FeatureSet, window: usize) -> Result<PreparedData> {
    let s = split(episodes);
    if s.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if s.validation.is_empty() {
        return Err(Error::NoValidationSplit);
    }
    let scaler = fit_scaler(s.train.iter().copied())?;
    let train = WindowSet::build(s.train.iter().copied(), &scaler, fs, window)?;
    let validation = WindowSet::build(s.validation.iter().copied(), &scaler, fs, window)?;
    assert_evaluation_only(&validation);
    Ok(PreparedData {
        scaler,
        train,
        validation,
    })
}

fn assert_evaluation_only(set: &WindowSet) {
    for w in &set.index {
        let m = &set.episodes[w.episode].meta;
        assert!(
            m.repetition == 4 || m.holdout,
            "training episode in evaluation set: {m:?}"
        );
    }
}

/// Trains one cell and returns the outcome with its estimator bundle.
pub fn train_cell(cell: &Cell, data: &PreparedData, base: &TrainConfig) -> Result<(TrainOutcome, ForceEstimator)> {
    let spec = cell.model_spec()?;
    let outcome = train(spec, &cell.train_config(base), &data.train, Some(&data.validation))?;
    let est = ForceEstimator::new(outcome.best.clone(), data.scaler.clone(), cell.feature_set, data.train.window)?;
    Ok((outcome, est))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LedgerEntry {
    key: String,
    row: ResultRow,
}

fn cell_key(cell: &Cell, g: &GridSpec, fingerprint: &str) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cell)?);
    h.update(serde_json::to_vec(&g.train)?);
    h.update(g.window.to_le_bytes());
    h.update(g.eval_stride.to_le_bytes());
    h.update(fingerprint.as_bytes());
    Ok(hex::encode(h.finalize()))
}

/// Reads an append-only JSON-lines ledger; a truncated last line is ignored.
fn read_ledger(path: &Path) -> Result<HashMap<String, ResultRow>> {
    let mut out = HashMap::new();
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(Error::io(path, e)),
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LedgerEntry>(&line) {
            Ok(e) => {
                out.insert(e.key, e.row);
            }
            Err(err) => log::warn!("skipping unreadable ledger line in {}: {err}", path.display()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub rows: Vec<ResultRow>,
    pub trained: usize,
    pub cached: usize,
    pub failures: Vec<(Cell, String)>,
}

/// Trains every cell on reps 1-3 and evaluates the best-validation snapshot
/// on rep-4 episodes. Cells found in `ledger` are not retrained; new rows
/// are appended to it as they finish.
pub fn run_grid(g: &GridSpec, episodes: &[Episode], ledger: Option<&Path>) -> Result<GridOutcome> {
    g.validate()?;
    let cells = g.cells();
    log::info!("grid of {} cells", cells.len());
    for c in &cells {
        log::debug!("cell {c:?}");
    }
    let fingerprint = dataset_fingerprint(episodes)?;
    let cached = match ledger {
        Some(p) => read_ledger(p)?,
        None => HashMap::new(),
    };
    let keys = cells
        .iter()
        .map(|c| cell_key(c, g, &fingerprint))
        .collect::<Result<Vec<_>>>()?;
    let todo: Vec<usize> = (0..cells.len()).filter(|&i| !cached.contains_key(&keys[i])).collect();

    let mut data: HashMap<FeatureSet, PreparedData> = HashMap::new();
    for &i in &todo {
        let fs = cells[i].feature_set;
        if let std::collections::hash_map::Entry::Vacant(e) = data.entry(fs) {
            e.insert(prepare(episodes, fs, g.window)?);
        }
    }
    let writer = match ledger {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::io(p, e))?;
            Some(Mutex::new(f))
        }
        None => None,
    };

    let run = |i: &usize| -> (usize, Result<ResultRow>) {
        let cell = &cells[*i];
        let result = (|| {
            let start = Instant::now();
            let d = &data[&cell.feature_set];
            let (outcome, _) = train_cell(cell, d, &g.train)?;
            let report = evaluate(&outcome.best, &d.validation, g.eval_stride)?;
            let row = ResultRow::new(cell, ObjectGroup::All, &report, start.elapsed().as_secs_f64())?;
            if let (Some(w), Some(p)) = (&writer, ledger) {
                let line = serde_json::to_string(&LedgerEntry {
                    key: keys[*i].clone(),
                    row: row.clone(),
                })?;
                let mut f = w.lock().expect("ledger lock");
                writeln!(f, "{line}").map_err(|e| Error::io(p, e))?;
                f.flush().map_err(|e| Error::io(p, e))?;
            }
            log::info!("{}: pooled rmse {:.4}", row.label(), row.rmse_pooled);
            Ok(row)
        })();
        (*i, result)
    };
    let results: Vec<(usize, Result<ResultRow>)> = match g.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(|| todo.par_iter().map(run).collect()),
        None => todo.par_iter().map(run).collect(),
    };

    let mut fresh: HashMap<usize, ResultRow> = HashMap::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(row) => {
                fresh.insert(i, row);
            }
            Err(e) => {
                log::error!("cell {:?} failed: {e}", cells[i]);
                failures.push((cells[i], e.to_string()));
            }
        }
    }
    let trained = fresh.len();
    let mut rows = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        if let Some(r) = fresh.remove(&i).or_else(|| cached.get(key).cloned()) {
            rows.push(r);
        }
    }
    normalize(&mut rows);
    Ok(GridOutcome {
        cached: cells.len() - todo.len(),
        rows,
        trained,
        failures,
    })
}

/// The same model trained on each of the seven feature sets.
pub fn ablate_features(spec: (Arch, usize, usize), base: &GridSpec, episodes: &[Episode], ledger: Option<&Path>) -> Result<GridOutcome> {
    let g = GridSpec {
        archs: vec![spec.0],
        layer_values: vec![spec.1],
        hidden_values: vec![spec.2],
        feature_sets: FeatureSet::ALL.to_vec(),
        ..base.clone()
    };
    run_grid(&g, episodes, ledger)
}

/// RMSE per object group: validation episodes by shape, all holdout
/// episodes as `Untrained`, and the sample-weighted pool as `All`.
pub fn eval_by_object(est: &ForceEstimator, episodes: &[Episode], seed: u64, stride: usize) -> Result<Vec<ResultRow>> {
    est.validate()?;
    let s = split(episodes);
    if s.holdout.is_empty() {
        return Err(Error::NoHoldout);
    }
    let spec = est.weights.spec;
    let cell = Cell {
        arch: spec.arch,
        layers: spec.layers,
        hidden: spec.hidden,
        feature_set: est.feature_set,
        seed,
    };
    let mut groups: Vec<(ObjectGroup, Vec<&Episode>)> = Vec::new();
    for shape in [ObjectShape::Convex, ObjectShape::Concave, ObjectShape::Square] {
        let eps: Vec<&Episode> = s
            .validation
            .iter()
            .copied()
            .filter(|e| e.meta.object_shape == shape)
            .collect();
        if !eps.is_empty() {
            groups.push((ObjectGroup::of_shape(shape), eps));
        }
    }
    groups.push((ObjectGroup::Untrained, s.holdout));
    let mut rows = Vec::new();
    for (group, eps) in groups {
        let start = Instant::now();
        let set = WindowSet::build(eps, &est.scaler, est.feature_set, est.window)?;
        assert_evaluation_only(&set);
        let r = evaluate(&est.weights, &set, stride)?;
        rows.push(ResultRow::new(&cell, group, &r, start.elapsed().as_secs_f64())?);
    }
    let pooled = RmseReport::pool(rows.iter().map(|r| r.report()).collect::<Vec<_>>().iter());
    let wall: f64 = rows.iter().map(|r| r.wall_time).sum();
    rows.push(ResultRow::new(&cell, ObjectGroup::All, &pooled, wall)?);
    normalize(&mut rows);
    Ok(rows)
}

pub const CSV_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisRow {
    pub label: String,
    pub object_group: ObjectGroup,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub pooled: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub best: ResultRow,
    /// Pooled RMSE that `relative_rmse` is normalized against, N.
    pub normalization_anchor: f64,
    pub per_axis: Vec<AxisRow>,
}

/// Writes `results.csv` and `summary.json` under `out_dir`.
pub fn report(rows: &[ResultRow], out_dir: &Path) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::Empty("result rows"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv_path = out_dir.join(CSV_FILE);
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let summary = Summary {
        rows: rows.len(),
        best: best_row(rows).expect("non-empty").clone(),
        normalization_anchor: rows.iter().map(|r| r.rmse_pooled).fold(0.0, f64::max),
        per_axis: rows
            .iter()
            .map(|r| AxisRow {
                label: r.label(),
                object_group: r.object_group,
                fx: r.rmse_fx,
                fy: r.rmse_fy,
                fz: r.rmse_fz,
                pooled: r.rmse_pooled,
            })
            .collect(),
    };
    crate::dataset::write_text(&out_dir.join(SUMMARY_FILE), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Reads rows from a results CSV or a JSON-lines ledger.
pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let mut rows: Vec<ResultRow> = read_ledger(path)?.into_values().collect();
        rows.sort_by(|a, b| {
            (a.arch, a.layers, a.hidden, a.feature_set, a.seed).cmp(&(b.arch, b.layers, b.hidden, b.feature_set, b.seed))
        });
        normalize(&mut rows);
        return Ok(rows);
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_dataset, MotionSchedule, ObjectSpec, SweepSpec};

    fn tiny_episodes() -> Vec<Episode> {
        let spec = SweepSpec {
            objects: vec![
                ObjectSpec {
                    shape: ObjectShape::Convex,
                    size: 20.0,
                    holdout: true,
                },
                ObjectSpec {
                    shape: ObjectShape::Convex,
                    size: 30.0,
                    holdout: false,
                },
                ObjectSpec {
                    shape: ObjectShape::Square,
                    size: 25.0,
                    holdout: false,
                },
            ],
            pressures: vec![20.0],
            offsets_y: vec![0.0],
            offsets_z: vec![0.0],
            schedule: MotionSchedule {
                move_distance: 1.0,
                pressurize_s: 0.2,
                settle_s: 0.3,
                release_s: 0.2,
                ..MotionSchedule::default()
            },
            ..SweepSpec::default()
        };
        generate_dataset(&spec, 5).unwrap()
    }

    fn tiny_grid() -> GridSpec {
        GridSpec {
            archs: vec![Arch::Mlp, Arch::Gru],
            layer_values: vec![1],
            hidden_values: vec![2],
            window: 4,
            train: TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
            jobs: Some(1),
            ..GridSpec::default()
        }
    }

    fn row(arch: Arch, pooled: f64, params: usize) -> ResultRow {
        ResultRow {
            arch,
            layers: 1,
            hidden: 1,
            feature_set: FeatureSet::T7,
            object_group: ObjectGroup::All,
            rmse_fx: pooled,
            rmse_fy: pooled,
            rmse_fz: pooled,
            rmse_pooled: pooled,
            relative_rmse: 1.0,
            seed: 0,
            wall_time: 0.0,
            params,
            samples: 1,
        }
    }

    #[test]
    fn default_grid_has_36_cells() {
        assert_eq!(GridSpec::default().cells().len(), 36);
    }

    #[test]
    fn single_cell_is_self_normalized() {
        let eps = tiny_episodes();
        let g = GridSpec {
            archs: vec![Arch::Gru],
            ..tiny_grid()
        };
        let out = run_grid(&g, &eps, None).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].relative_rmse, 1.0);
    }

    #[test]
    fn ledger_skips_finished_cells() {
        let eps = tiny_episodes();
        let dir = tempfile::tempdir().unwrap();
        let ledger = dir.path().join("runs.jsonl");
        let first = run_grid(&tiny_grid(), &eps, Some(&ledger)).unwrap();
        assert_eq!((first.trained, first.cached), (2, 0));
        let second = run_grid(&tiny_grid(), &eps, Some(&ledger)).unwrap();
        assert_eq!((second.trained, second.cached), (0, 2));
        assert_eq!(first.rows, second.rows);
        assert_eq!(read_rows(&ledger).unwrap().len(), 2);
    }

    #[test]
    fn grid_is_deterministic() {
        let eps = tiny_episodes();
        let mut a = run_grid(&tiny_grid(), &eps, None).unwrap().rows;
        let mut b = run_grid(&tiny_grid(), &eps, None).unwrap().rows;
        for r in a.iter_mut().chain(b.iter_mut()) {
            r.wall_time = 0.0;
        }
        assert_eq!(a, b);
    }

    #[test]
    fn missing_validation_split() {
        let eps: Vec<Episode> = tiny_episodes().into_iter().filter(|e| e.meta.repetition != 4).collect();
        assert!(matches!(prepare(&eps, FeatureSet::T7, 4), Err(Error::NoValidationSplit)));
    }

    #[test]
    fn best_row_tie_break() {
        let rows = vec![row(Arch::Rnn, 0.2, 50), row(Arch::Gru, 0.2, 50), row(Arch::Lstm, 0.2, 40), row(Arch::Mlp, 0.3, 10)];
        assert_eq!(best_row(&rows).unwrap().arch, Arch::Lstm);
        let rows = vec![row(Arch::Rnn, 0.2, 50), row(Arch::Gru, 0.2, 50)];
        assert_eq!(best_row(&rows).unwrap().arch, Arch::Gru);
    }

    #[test]
    fn normalization_is_scale_free() {
        let mut a = vec![row(Arch::Rnn, 0.2, 1), row(Arch::Gru, 0.1, 1), row(Arch::Mlp, 0.4, 1)];
        let mut b: Vec<_> = a.iter().map(|r| ResultRow { rmse_pooled: r.rmse_pooled * 7.5, ..r.clone() }).collect();
        normalize(&mut a);
        normalize(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.relative_rmse - y.relative_rmse).abs() < 1e-15);
        }
        assert_eq!(a.iter().map(|r| r.relative_rmse).fold(0.0, f64::max), 1.0);
        assert_eq!(best_row(&a).unwrap().arch, Arch::Gru);
    }

    #[test]
    fn report_writes_csv_and_summary() {
        let mut rows: Vec<_> = (0..36).map(|i| row(Arch::Gru, 0.1 + i as f64 * 0.01, 10)).collect();
        normalize(&mut rows);
        let dir = tempfile::tempdir().unwrap();
        let s = report(&rows, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(CSV_FILE)).unwrap();
        assert_eq!(text.lines().count(), 37);
        assert!(text.starts_with("arch,layers,hidden,feature_set,object_group,rmse_fx"));
        assert_eq!(s.best.rmse_pooled, 0.1);
        let back = read_rows(&dir.path().join(CSV_FILE)).unwrap();
        assert_eq!(back, rows);
        assert!(report(&[], dir.path()).is_err());
    }

    #[test]
    fn by_object_groups_and_pool() {
        let eps = tiny_episodes();
        let data = prepare(&eps, FeatureSet::T7, 4).unwrap();
        let cell = Cell {
            arch: Arch::Gru,
            layers: 1,
            hidden: 2,
            feature_set: FeatureSet::T7,
            seed: 0,
        };
        let (_, est) = train_cell(&cell, &data, &TrainConfig { epochs: 1, ..TrainConfig::default() }).unwrap();
        let rows = eval_by_object(&est, &eps, 0, 1).unwrap();
        let groups: Vec<_> = rows.iter().map(|r| r.object_group).collect();
        assert_eq!(groups, vec![ObjectGroup::Convex, ObjectGroup::Square, ObjectGroup::Untrained, ObjectGroup::All]);
        let untrained = &rows[2];
        let holdout_frames: usize = eps.iter().filter(|e| e.meta.holdout).map(|e| e.len() - 3).sum();
        assert_eq!(untrained.samples, holdout_frames);
        let all = rows.last().unwrap();
        let sse: f64 = rows[..3].iter().map(|r| r.rmse_pooled.powi(2) * r.samples as f64).sum();
        let n: usize = rows[..3].iter().map(|r| r.samples).sum();
        assert!((all.rmse_pooled - (sse / n as f64).sqrt()).abs() < 1e-9);

        let no_holdout: Vec<Episode> = eps.into_iter().filter(|e| !e.meta.holdout).collect();
        assert!(matches!(eval_by_object(&est, &no_holdout, 0, 1), Err(Error::NoHoldout)));
    }
}
