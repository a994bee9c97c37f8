//! Experiment drivers shared by the command line, the C interface and the
//! test suites: dataset loading, training with artifacts, and evaluation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baselines::DppcpController;
use crate::config::{ExperimentConfig, Method};
use crate::discriminator::DiscLogWriter;
use crate::error::{Error, Result};
use crate::eval::{evaluate_controller, evaluate_policy, reference_paths, EvalEpisode, EvalSettings};
use crate::metrics::{resample_by_arc_length, write_episode_csv, EpisodeMetrics, MetricSummary, MetricsReport};
use crate::motion::{
    default_reference_specs, generate_reference_with, load_dataset, write_clip, MotionClip,
    ReferenceTransitions, RetargetMap,
};
use crate::nn::Checkpoint;
use crate::policy::Policy;
use crate::sim::Vec2;
use crate::trainer::{write_trajectory_log, write_training_log, EpisodeStats, Trainer, TrainerSetup};

pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const TRAJECTORY_LOG_FILE: &str = "trajectories.csv";
pub const DISC_LOG_FILE: &str = "disc_log.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const EVAL_PATHS_FILE: &str = "eval_paths.csv";
pub const EE_PATHS_FILE: &str = "ee_paths.csv";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const VALUE_FILE: &str = "value.ckpt";
pub const DISCRIMINATOR_FILE: &str = "discriminator.ckpt";

/// The synthetic wind-up reference set.
pub fn synthetic_reference_clips(cfg: &ExperimentConfig) -> Result<Vec<MotionClip>> {
    default_reference_specs(&cfg.env)
        .iter()
        .map(|s| generate_reference_with(s, &cfg.env))
        .collect()
}

/// Writes the synthetic reference set as `ref_NN.csv` files.
pub fn write_reference_set(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    synthetic_reference_clips(cfg)?
        .iter()
        .enumerate()
        .map(|(i, clip)| {
            let path = dir.join(format!("ref_{i:02}.csv"));
            write_clip(&path, clip)?;
            Ok(path)
        })
        .collect()
}

/// Reference clips required by `method`: mandatory for HMAMP, optional
/// otherwise (used only for path comparisons).
pub fn load_reference(cfg: &ExperimentConfig) -> Result<Option<Vec<MotionClip>>> {
    match load_dataset(&cfg.dataset) {
        Ok(clips) => Ok(Some(clips)),
        Err(Error::MissingDataset(_)) if cfg.method != Method::Hmamp => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn trainer_setup(cfg: &ExperimentConfig, clips: Option<&[MotionClip]>) -> Result<TrainerSetup> {
    if !cfg.method.is_learned() {
        return Err(Error::Config("dppcp is a planner and has no training phase".into()));
    }
    let (train, weights) = cfg.effective_training();
    let reference = match clips {
        Some(c) if train.disc_updates > 0 => Some(ReferenceTransitions::from_clips(c, &RetargetMap::default(), &cfg.env)?),
        _ => None,
    };
    if train.disc_updates > 0 && reference.is_none() {
        return Err(Error::MissingDataset(cfg.dataset.clone()));
    }
    Ok(TrainerSetup {
        sim: cfg.env.clone(),
        weights,
        train,
        disc: cfg.discriminator.clone(),
        policy: cfg.policy.clone(),
        nets: cfg.nets.clone(),
        reference,
        reference_paths: clips.map(reference_paths).unwrap_or_default(),
    })
}

pub struct TrainOutcome {
    pub trainer: Trainer,
    pub stats: Vec<EpisodeStats>,
}

/// Trains per `cfg`. With `out` set, writes the configuration snapshot,
/// logs and checkpoints there.
pub fn run_training(
    cfg: &ExperimentConfig,
    clips: Option<&[MotionClip]>,
    out: Option<&Path>,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut trainer = Trainer::new(trainer_setup(cfg, clips)?)?;
    let mut disc_log = match out {
        Some(dir) => {
            cfg.write_snapshot(dir)?;
            Some(DiscLogWriter::create(&dir.join(DISC_LOG_FILE))?)
        }
        None => None,
    };
    let mut log_error = None;
    let stats = trainer.train(|s| {
        if let Some(w) = disc_log.as_mut() {
            for d in &s.disc_steps {
                if let Err(e) = w.write(d) {
                    log_error.get_or_insert(e);
                }
            }
        }
        on_episode(s);
    })?;
    if let Some(e) = log_error {
        return Err(e);
    }
    if let Some(dir) = out {
        if let Some(mut w) = disc_log {
            w.flush()?;
        }
        write_training_log(BufWriter::new(File::create(dir.join(TRAINING_LOG_FILE))?), &stats)?;
        write_trajectory_log(BufWriter::new(File::create(dir.join(TRAJECTORY_LOG_FILE))?), &stats)?;
        let seed = cfg.training.seed;
        let step = trainer.episodes_done() as u64;
        trainer.policy().to_checkpoint(seed, step).save(&dir.join(POLICY_FILE))?;
        trainer.value().to_checkpoint(seed, step).save(&dir.join(VALUE_FILE))?;
        trainer.discriminator().to_checkpoint(seed).save(&dir.join(DISCRIMINATOR_FILE))?;
    }
    Ok(TrainOutcome { trainer, stats })
}

pub fn load_policy(path: &Path, cfg: &ExperimentConfig) -> Result<Policy> {
    Policy::from_checkpoint(&Checkpoint::load(path)?, &cfg.env)
}

fn eval_settings(cfg: &ExperimentConfig) -> EvalSettings {
    EvalSettings {
        episodes: cfg.eval.episodes,
        seed: cfg.eval.seed,
    }
}

/// Evaluates a learned policy or the planner with observation noise off.
pub fn evaluate_method(
    cfg: &ExperimentConfig,
    policy: Option<&Policy>,
    references: &[Vec<Vec2>],
) -> Result<Vec<EvalEpisode>> {
    let settings = eval_settings(cfg);
    match (cfg.method, policy) {
        (Method::Dppcp, _) => {
            evaluate_controller(&mut DppcpController::new(cfg.dppcp.clone()), &cfg.env, &settings, references)
        }
        (_, Some(p)) => evaluate_policy(p, &cfg.env, &settings, references),
        (m, None) => Err(Error::Config(format!("evaluating {m} requires a policy checkpoint"))),
    }
}

/// Evaluation artifacts for one or more methods.
pub fn write_eval_outputs(dir: &Path, results: &[(Method, Vec<EvalEpisode>)]) -> Result<MetricsReport> {
    std::fs::create_dir_all(dir)?;
    let mut columns = Vec::with_capacity(results.len());
    for (method, rows) in results {
        let metrics: Vec<EpisodeMetrics> = rows.iter().map(|r| r.metrics).collect();
        columns.push((method.label().to_string(), MetricSummary::from_episodes(&metrics)?));
    }
    let report = MetricsReport { columns };
    report.write_csv(BufWriter::new(File::create(dir.join(METRICS_FILE))?))?;
    std::fs::write(dir.join(REPORT_FILE), report.to_text())?;
    let mut episodes = Vec::new();
    for (method, rows) in results {
        let metrics: Vec<EpisodeMetrics> = rows.iter().map(|r| r.metrics).collect();
        let mut buf = Vec::new();
        write_episode_csv(&mut buf, method.as_str(), &metrics)?;
        let text = String::from_utf8(buf).expect("csv output is UTF-8");
        // One header for the combined file.
        let skip = if episodes.is_empty() { 0 } else { 1 };
        for line in text.lines().skip(skip) {
            episodes.push(line.to_string());
        }
    }
    std::fs::write(dir.join(EPISODES_FILE), episodes.join("\n") + "\n")?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(EVAL_PATHS_FILE))?));
    w.write_record(["method", "episode", "step", "x", "y"])?;
    for (method, rows) in results {
        for (i, r) in rows.iter().enumerate() {
            for (k, p) in r.log.ee_path.iter().enumerate() {
                w.write_record([
                    method.as_str().to_string(),
                    i.to_string(),
                    k.to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(report)
}

/// One labelled path from an evaluation path log.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledPath {
    pub source: String,
    pub id: usize,
    pub points: Vec<Vec2>,
}

/// Reads `eval_paths.csv`.
pub fn read_eval_paths(path: &Path) -> Result<Vec<LabelledPath>> {
    if !path.is_file() {
        return Err(Error::MissingDataset(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<LabelledPath> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: line + 2,
                msg: format!("column {i} is missing or not a number"),
            })
        };
        let source = rec.get(0).unwrap_or_default().to_string();
        let id = parse(1)? as usize;
        let p = Vec2::new(parse(3)?, parse(4)?);
        match out.last_mut() {
            Some(last) if last.source == source && last.id == id => last.points.push(p),
            _ => out.push(LabelledPath {
                source,
                id,
                points: vec![p],
            }),
        }
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("{} holds no paths", path.display())));
    }
    Ok(out)
}

/// Arc-length-resampled paths, `samples` rows each, for external plotting.
pub fn write_plot_data<W: Write>(writer: W, paths: &[LabelledPath], samples: usize) -> Result<Vec<LabelledPath>> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "path", "index", "x", "y"])?;
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let points = resample_by_arc_length(&p.points, samples)?;
        for (k, q) in points.iter().enumerate() {
            w.write_record([p.source.clone(), p.id.to_string(), k.to_string(), q.x.to_string(), q.y.to_string()])?;
        }
        out.push(LabelledPath {
            source: p.source.clone(),
            id: p.id,
            points,
        });
    }
    w.flush()?;
    Ok(out)
}

/// Reference paths labelled for plotting.
pub fn labelled_reference_paths(clips: &[MotionClip]) -> Vec<LabelledPath> {
    reference_paths(clips)
        .into_iter()
        .enumerate()
        .map(|(id, points)| LabelledPath {
            source: "reference".into(),
            id,
            points,
        })
        .collect()
}
