//! The `softtouch` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or
//! validation error, 3 internal error. Log verbosity comes from the
//! `SOFTTOUCH_LOG` environment variable (`error` .. `trace`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::contact::{classify_stream, replay_scenario, ContactStateConfig, ForceSource, ReplayConfig, Scenario};
use crate::dataset::{read_dataset, read_frames, validate_dataset, write_dataset, write_text};
use crate::error::{Error, Result};
use crate::estimator::ForceEstimator;
use crate::experiment::{
    ablate_features, eval_by_object, prepare, read_rows, report, run_grid, split, Cell, GridSpec, ObjectGroup, ResultRow,
};
use crate::neural::{evaluate, Arch, TrainConfig};
use crate::preprocess::{FeatureSet, WindowSet, DEFAULT_WINDOW};
use crate::sim::{generate_dataset, SweepSpec};
use crate::types::SAMPLE_PERIOD;

pub const RESOLVED_CONFIG: &str = "resolved_config";
pub const LOG_ENV: &str = "SOFTTOUCH_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "softtouch",
    version,
    about = "Force estimation and contact-state detection for soft tactile fingers",
    disable_help_subcommand = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed for every random draw
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    /// Architecture: mlp, rnn, lstm or gru
    #[arg(long)]
    pub arch: Option<Arch>,
    /// Number of stacked layers
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hidden units per layer
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Input feature set, t1 to t7
    #[arg(long, value_name = "SET")]
    pub features: Option<FeatureSet>,
    /// Window length in frames
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Train on one in N windows per epoch, rotating the phase
    #[arg(long, value_name = "N")]
    pub sample_stride: Option<usize>,
    /// Validate on one in N windows
    #[arg(long, value_name = "N")]
    pub val_stride: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the data-collection sweep into a dataset directory
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Fingers per grasp (1 or 2)
        #[arg(long)]
        n_fingers: Option<u8>,
    },
    /// Train one model and write its weights bundle and history
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory
        #[arg(long, value_name = "DIR")]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train and evaluate every cell of a hyperparameter grid
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        dataset: Option<PathBuf>,
        /// Parallel training jobs
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Train one model on each of the seven feature sets
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        dataset: Option<PathBuf>,
        /// Take the model shape from this weights bundle
        #[arg(long, value_name = "FILE", conflicts_with = "spec")]
        weights: Option<PathBuf>,
        /// Model shape as ARCH:LAYERS:HIDDEN, e.g. gru:1:10
        #[arg(long)]
        spec: Option<String>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Evaluate a weights bundle on the validation split
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
        /// Report per object group, including the untrained object
        #[arg(long)]
        by_object: bool,
    },
    /// Classify contact states and events in a recorded frames file
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE", required_unless_present = "ground_truth")]
        weights: Option<PathBuf>,
        /// frames.csv in dataset format
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Classify the recorded force labels instead of model estimates
        #[arg(long)]
        ground_truth: bool,
    },
    /// Replay a slip or plug-insertion scenario through the pipeline
    Replay {
        #[command(flatten)]
        common: Common,
        /// slip_test, plug_success, plug_overpush or plug_misalign
        #[arg(long)]
        scenario: String,
        #[arg(long, value_name = "FILE", required_unless_present = "ground_truth")]
        weights: Option<PathBuf>,
        /// Use simulator forces instead of model estimates
        #[arg(long)]
        ground_truth: bool,
        /// Force-excursion threshold in newtons; calibrated when omitted
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Write a CSV and JSON summary from results or a run ledger
    Report {
        /// results.csv or runs.jsonl
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Check a dataset directory against the schema
    Validate {
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
    },
}

/// Model shape and preprocessing for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
    pub feature_set: FeatureSet,
    pub window: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Gru,
            layers: 1,
            hidden: 10,
            feature_set: FeatureSet::T7,
            window: DEFAULT_WINDOW,
        }
    }
}

/// Contents of a configuration file; every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub sweep: SweepSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub grid: GridSpec,
    pub contact: ContactStateConfig,
    pub replay: ReplayConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Toml(_) => 1,
        e if e.is_data_error() => 2,
        _ => 3,
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            if code == 1 && e.kind() == ErrorKind::UnknownArgument {
                let _ = Cli::command().print_help();
            }
            return code;
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli.command))) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            3
        }
    }
}

fn require_out(common: &Common) -> Result<PathBuf> {
    common
        .out
        .clone()
        .ok_or_else(|| Error::Config("--out is required".into()))
}

fn write_resolved(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&out.join(RESOLVED_CONFIG), &cfg.to_toml()?)
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn dataset_path(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.dataset.clone())
        .ok_or_else(|| Error::Config("--dataset is required".into()))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { common, n_fingers } => {
            let out = require_out(&common)?;
            let mut cfg = base_config(&common)?;
            if let Some(n) = n_fingers {
                cfg.sweep.n_fingers = n;
            }
            write_resolved(&out, &cfg)?;
            let episodes = generate_dataset(&cfg.sweep, cfg.seed)?;
            write_dataset(&out, &episodes)?;
            println!("wrote {} episodes to {}", episodes.len(), out.display());
            Ok(())
        }
        Command::Train {
            common,
            dataset,
            model,
            train,
        } => cmd_train(common, dataset, model, train),
        Command::Grid { common, dataset, jobs } => {
            let out = require_out(&common)?;
            let mut cfg = base_config(&common)?;
            let path = dataset_path(&dataset.or(cfg.grid.dataset.clone()), &cfg)?;
            cfg.dataset = Some(path.clone());
            cfg.grid.dataset = Some(path.clone());
            if let Some(s) = common.seed {
                cfg.grid.seeds = vec![s];
            }
            if jobs.is_some() {
                cfg.grid.jobs = jobs;
            }
            cfg.grid.validate()?;
            write_resolved(&out, &cfg)?;
            let episodes = read_dataset(&path)?;
            let outcome = run_grid(&cfg.grid, &episodes, Some(&out.join("runs.jsonl")))?;
            finish_rows(&outcome.rows, &out)?;
            println!(
                "{} cells: {} trained, {} cached, {} failed",
                outcome.rows.len() + outcome.failures.len(),
                outcome.trained,
                outcome.cached,
                outcome.failures.len()
            );
            Ok(())
        }
        Command::Ablate {
            common,
            dataset,
            weights,
            spec,
            jobs,
        } => {
            let out = require_out(&common)?;
            let mut cfg = base_config(&common)?;
            let path = dataset_path(&dataset, &cfg)?;
            cfg.dataset = Some(path.clone());
            let shape = match (weights, spec) {
                (Some(w), _) => {
                    let s = ForceEstimator::load(&w)?.weights.spec;
                    (s.arch, s.layers, s.hidden)
                }
                (None, Some(s)) => parse_shape(&s)?,
                (None, None) => (cfg.model.arch, cfg.model.layers, cfg.model.hidden),
            };
            cfg.model.arch = shape.0;
            cfg.model.layers = shape.1;
            cfg.model.hidden = shape.2;
            if let Some(s) = common.seed {
                cfg.grid.seeds = vec![s];
            }
            if jobs.is_some() {
                cfg.grid.jobs = jobs;
            }
            write_resolved(&out, &cfg)?;
            let episodes = read_dataset(&path)?;
            let outcome = ablate_features(shape, &cfg.grid, &episodes, Some(&out.join("runs.jsonl")))?;
            finish_rows(&outcome.rows, &out)
        }
        Command::Eval {
            common,
            weights,
            dataset,
            by_object,
        } => {
            let cfg = base_config(&common)?;
            let est = ForceEstimator::load(&weights)?;
            let episodes = read_dataset(&dataset)?;
            let rows = if by_object {
                eval_by_object(&est, &episodes, cfg.seed, 1)?
            } else {
                let val = split(&episodes).validation;
                if val.is_empty() {
                    return Err(Error::NoValidationSplit);
                }
                let set = WindowSet::build(val, &est.scaler, est.feature_set, est.window)?;
                let r = evaluate(&est.weights, &set, 1)?;
                let s = est.weights.spec;
                let cell = Cell {
                    arch: s.arch,
                    layers: s.layers,
                    hidden: s.hidden,
                    feature_set: est.feature_set,
                    seed: cfg.seed,
                };
                vec![ResultRow {
                    arch: cell.arch,
                    layers: cell.layers,
                    hidden: cell.hidden,
                    feature_set: cell.feature_set,
                    object_group: ObjectGroup::All,
                    rmse_fx: r.rmse[0],
                    rmse_fy: r.rmse[1],
                    rmse_fz: r.rmse[2],
                    rmse_pooled: r.pooled,
                    relative_rmse: 1.0,
                    seed: cfg.seed,
                    wall_time: 0.0,
                    params: s.param_count(),
                    samples: r.count,
                }]
            };
            if let Some(out) = &common.out {
                write_resolved(out, &cfg)?;
                report(&rows, out)?;
            }
            print_rows(&rows);
            Ok(())
        }
        Command::Detect {
            common,
            weights,
            input,
            ground_truth,
        } => {
            let cfg = base_config(&common)?;
            let (frames, labels, _) = read_frames(&input)?;
            let forces = match (ground_truth, weights) {
                (true, _) => labels,
                (false, Some(w)) => ForceEstimator::load(&w)?.estimate(&frames)?,
                (false, None) => return Err(Error::Config("--weights or --ground-truth is required".into())),
            };
            let stream = classify_stream(&forces, &cfg.contact)?;
            let t_of = |k: usize| frames.get(k).map_or(k as f64 * SAMPLE_PERIOD, |f| f.t);
            let mut events = String::new();
            for e in &stream.events {
                let line = serde_json::json!({"kind": e.kind, "frame": e.frame, "t": t_of(e.frame)});
                writeln!(events, "{line}").expect("string write");
            }
            match &common.out {
                Some(out) => {
                    write_resolved(out, &cfg)?;
                    write_text(&out.join("events.jsonl"), &events)?;
                    let mut trace = String::from("t,state,f_n,f_f,ratio,micro_slip\n");
                    for (k, s) in stream.states.iter().enumerate() {
                        writeln!(
                            trace,
                            "{},{},{},{},{},{}",
                            crate::dataset::format_float(t_of(k)),
                            s.state.as_str(),
                            crate::dataset::format_float(s.f_n),
                            crate::dataset::format_float(s.f_f),
                            s.ratio.map(crate::dataset::format_float).unwrap_or_default(),
                            u8::from(s.micro_slip)
                        )
                        .expect("string write");
                    }
                    write_text(&out.join("states.csv"), &trace)?;
                    println!("{} events, {} frames", stream.events.len(), stream.states.len());
                }
                None => {
                    print!("{events}");
                }
            }
            Ok(())
        }
        Command::Replay {
            common,
            scenario,
            weights,
            ground_truth,
            threshold,
        } => {
            let mut cfg = base_config(&common)?;
            let scenario = Scenario::parse(&scenario)?;
            if threshold.is_some() {
                cfg.replay.excursion_threshold = threshold;
            }
            let est = match (ground_truth, weights) {
                (true, _) => None,
                (false, Some(w)) => Some(ForceEstimator::load(&w)?),
                (false, None) => return Err(Error::Config("--weights or --ground-truth is required".into())),
            };
            let source = est.as_ref().map_or(ForceSource::GroundTruth, ForceSource::Model);
            if let Some(out) = &common.out {
                write_resolved(out, &cfg)?;
            }
            let rep = replay_scenario(scenario, source, &cfg.replay, cfg.seed)?;
            let json = serde_json::to_string_pretty(&rep)?;
            match &common.out {
                Some(out) => {
                    write_text(&out.join(format!("replay_{}.json", scenario.as_str())), &json)?;
                    println!(
                        "{}: {} events, {} excursions",
                        scenario.as_str(),
                        rep.events.len(),
                        rep.excursions.len()
                    );
                }
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Report { input, out } => {
            let rows = read_rows(&input)?;
            let summary = report(&rows, &out)?;
            println!("best: {} pooled rmse {:.4}", summary.best.label(), summary.best.rmse_pooled);
            Ok(())
        }
        Command::Validate { dataset } => {
            let r = validate_dataset(&dataset)?;
            println!("{}", r.summary());
            if r.is_ok() {
                Ok(())
            } else if r.validation_episodes == 0 && r.episodes > 0 {
                Err(Error::NoValidationSplit)
            } else {
                Err(Error::dataset(&dataset, format!("{} check(s) failed", r.issues.len())))
            }
        }
    }
}

fn cmd_train(common: Common, dataset: Option<PathBuf>, model: ModelArgs, train: TrainArgs) -> Result<()> {
    let out = require_out(&common)?;
    let mut cfg = base_config(&common)?;
    let path = dataset_path(&dataset, &cfg)?;
    cfg.dataset = Some(path.clone());
    let m = &mut cfg.model;
    m.arch = model.arch.unwrap_or(m.arch);
    m.layers = model.layers.unwrap_or(m.layers);
    m.hidden = model.hidden.unwrap_or(m.hidden);
    m.feature_set = model.features.unwrap_or(m.feature_set);
    m.window = model.window.unwrap_or(m.window);
    let t = &mut cfg.train;
    t.epochs = train.epochs.unwrap_or(t.epochs);
    t.batch_size = train.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = train.learning_rate.unwrap_or(t.learning_rate);
    t.sample_stride = train.sample_stride.unwrap_or(t.sample_stride);
    t.val_stride = train.val_stride.unwrap_or(t.val_stride);
    t.validate()?;
    write_resolved(&out, &cfg)?;

    let episodes = read_dataset(&path)?;
    let data = prepare(&episodes, cfg.model.feature_set, cfg.model.window)?;
    let cell = Cell {
        arch: cfg.model.arch,
        layers: cfg.model.layers,
        hidden: cfg.model.hidden,
        feature_set: cfg.model.feature_set,
        seed: cfg.seed,
    };
    let (outcome, est) = crate::experiment::train_cell(&cell, &data, &cfg.train)?;
    est.save(&out.join("weights.json"))?;
    ForceEstimator {
        weights: outcome.weights.clone(),
        ..est.clone()
    }
    .save(&out.join("final_weights.json"))?;
    let mut hist = String::from("epoch,train_rmse,val_rmse\n");
    for h in &outcome.history {
        writeln!(
            hist,
            "{},{},{}",
            h.epoch,
            crate::dataset::format_float(h.train_rmse),
            h.val_rmse.map(crate::dataset::format_float).unwrap_or_default()
        )
        .expect("string write");
    }
    write_text(&out.join("history.csv"), &hist)?;
    log::info!("training took {:.1} s", outcome.wall_time);
    println!(
        "{}: best epoch {}, validation rmse {:.4}",
        outcome.best.spec.label(),
        outcome.best_epoch,
        outcome.history[outcome.best_epoch - 1].val_rmse.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn parse_shape(s: &str) -> Result<(Arch, usize, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("--spec must look like gru:1:10, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse()?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn finish_rows(rows: &[ResultRow], out: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("result rows"));
    }
    report(rows, out)?;
    print_rows(rows);
    Ok(())
}

fn print_rows(rows: &[ResultRow]) {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for r in rows {
        let _ = writeln!(
            lock,
            "{:<22} {:<9?} fx {:.4} fy {:.4} fz {:.4} pooled {:.4} rel {:.3}",
            r.label(),
            r.object_group,
            r.rmse_fx,
            r.rmse_fy,
            r.rmse_fz,
            r.rmse_pooled,
            r.relative_rmse
        );
    }
}

/// Long help of the program and of every subcommand, concatenated.
pub fn help_text() -> String {
    let mut cmd = Cli::command();
    let mut out = cmd.render_long_help().to_string();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        let sub = cmd.find_subcommand_mut(&name).expect("listed subcommand");
        let mut sub = sub.clone().bin_name(format!("softtouch {name}"));
        out.push_str(&format!("\n===== {name} =====\n"));
        out.push_str(&sub.render_long_help().to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(dispatch(["softtouch", "train", "--bogus"]), 1);
        assert_eq!(dispatch(["softtouch"]), 1);
        assert_eq!(dispatch(["softtouch", "--help"]), 0);
    }

    #[test]
    fn missing_input_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.csv");
        let code = dispatch([
            "softtouch".into(),
            "detect".into(),
            "--ground-truth".into(),
            "--input".into(),
            missing.into_os_string(),
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RunConfig {
            seed: 7,
            dataset: Some("d".into()),
            ..RunConfig::default()
        };
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        let cfg: RunConfig = toml::from_str("seed = 3\n[train]\nepochs = 4\n").unwrap();
        assert_eq!((cfg.seed, cfg.train.epochs, cfg.train.batch_size), (3, 4, 32));
    }

    #[test]
    fn shape_parsing() {
        assert_eq!(parse_shape("gru:1:10").unwrap(), (Arch::Gru, 1, 10));
        assert!(parse_shape("gru:1").is_err());
        assert!(parse_shape("cnn:1:2").is_err());
    }
}
