//! Evaluation metrics: knock impulse, energy efficiency, vertical force
//! ratio and discrete Fréchet distance, plus report formatting.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::sim::{Vec2, NUM_JOINTS};

/// Number of arc-length samples per path for Fréchet comparisons.
pub const PATH_SAMPLES: usize = 50;

/// Per-step samples of one evaluated episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub dt: f64,
    /// Force exerted on the nail (N).
    pub force: Vec<Vec2>,
    pub torque: Vec<[f64; NUM_JOINTS]>,
    pub joint_velocity: Vec<[f64; NUM_JOINTS]>,
    /// Hammer-head path.
    pub ee_path: Vec<Vec2>,
}

impl EpisodeLog {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn push(&mut self, force: Vec2, torque: [f64; NUM_JOINTS], joint_velocity: [f64; NUM_JOINTS], ee: Vec2) {
        self.force.push(force);
        self.torque.push(torque);
        self.joint_velocity.push(joint_velocity);
        self.ee_path.push(ee);
    }

    pub fn len(&self) -> usize {
        self.force.len()
    }

    pub fn is_empty(&self) -> bool {
        self.force.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Contract(format!("episode log dt must be positive, got {}", self.dt)));
        }
        let n = self.force.len();
        if self.torque.len() != n || self.joint_velocity.len() != n || self.ee_path.len() != n {
            return Err(Error::Contract("episode log series have different lengths".into()));
        }
        Ok(())
    }
}

/// Trapezoid rule over uniformly spaced samples.
pub fn trapezoid(samples: impl IntoIterator<Item = f64>, dt: f64) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for v in samples {
        if let Some(p) = prev {
            total += 0.5 * (p + v) * dt;
        }
        prev = Some(v);
    }
    total
}

/// `I = ∫‖F‖ dt`.
pub fn knock_impulse(log: &EpisodeLog) -> f64 {
    trapezoid(log.force.iter().map(|f| f.norm()), log.dt)
}

/// `E = Σ_i ∫|τ_i ω_i| dt`.
pub fn energy(log: &EpisodeLog) -> f64 {
    (0..NUM_JOINTS)
        .map(|i| {
            trapezoid(
                log.torque
                    .iter()
                    .zip(&log.joint_velocity)
                    .map(|(t, w)| (t[i] * w[i]).abs()),
                log.dt,
            )
        })
        .sum()
}

pub fn efficiency(impulse: f64, energy: f64) -> Result<f64> {
    if energy > 0.0 {
        Ok(impulse / energy)
    } else {
        Err(Error::UndefinedMetric("efficiency needs positive energy".into()))
    }
}

/// `∫|F_y| dt / ∫‖F‖ dt`.
pub fn vertical_force_ratio(log: &EpisodeLog) -> Result<f64> {
    let total = knock_impulse(log);
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("vertical force ratio needs a nonzero force impulse".into()));
    }
    let vertical = trapezoid(log.force.iter().map(|f| f.y.abs()), log.dt);
    Ok((vertical / total).clamp(0.0, 1.0))
}

/// Discrete Fréchet distance by dynamic programming over the coupling lattice.
pub fn frechet_distance(a: &[Vec2], b: &[Vec2]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Fréchet distance of an empty trajectory".into()));
    }
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = (p - q).norm();
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// `n` points evenly spaced by arc length along the polyline.
pub fn resample_by_arc_length(path: &[Vec2], n: usize) -> Result<Vec<Vec2>> {
    if path.is_empty() {
        return Err(Error::Empty("cannot resample an empty path".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut cumulative = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in path.windows(2) {
        acc += (w[1] - w[0]).norm();
        cumulative.push(acc);
    }
    let total = acc;
    if total <= 0.0 || n == 1 {
        return Ok(vec![path[0]; n.max(1)].into_iter().take(n).collect());
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let s = total * k as f64 / (n - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let u = if len > 0.0 {
            ((s - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(path[seg] + (path[seg + 1] - path[seg]) * u);
    }
    Ok(out)
}

/// Fréchet distance between two paths after arc-length resampling.
pub fn path_frechet(a: &[Vec2], b: &[Vec2]) -> Result<f64> {
    frechet_distance(
        &resample_by_arc_length(a, PATH_SAMPLES)?,
        &resample_by_arc_length(b, PATH_SAMPLES)?,
    )
}

/// Smallest path Fréchet distance to any reference path.
pub fn frechet_to_references(path: &[Vec2], references: &[Vec<Vec2>]) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Empty("no reference paths".into()));
    }
    let mut best = f64::INFINITY;
    for r in references {
        best = best.min(path_frechet(path, r)?);
    }
    Ok(best)
}

/// Metrics of one episode; undefined values are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub success: bool,
    pub impulse: f64,
    pub energy: f64,
    pub efficiency: f64,
    pub vertical_force_ratio: f64,
    pub frechet: f64,
    pub backswing: bool,
}

impl EpisodeMetrics {
    pub fn compute(log: &EpisodeLog, success: bool, references: &[Vec<Vec2>]) -> Result<Self> {
        log.validate()?;
        let impulse = knock_impulse(log);
        let e = energy(log);
        let heights: Vec<f64> = log.ee_path.iter().map(|p| p.y).collect();
        Ok(Self {
            success,
            impulse,
            energy: e,
            efficiency: efficiency(impulse, e).unwrap_or(f64::NAN),
            vertical_force_ratio: vertical_force_ratio(log).unwrap_or(f64::NAN),
            frechet: if references.is_empty() || log.ee_path.is_empty() {
                f64::NAN
            } else {
                frechet_to_references(&log.ee_path, references)?
            },
            backswing: crate::motion::has_backswing(&heights),
        })
    }
}

fn mean_defined(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Averages over evaluation episodes; NaN entries are skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub knock_impulse: f64,
    pub energy_efficiency: f64,
    pub vertical_force_ratio: f64,
    pub frechet: f64,
    pub backswing_rate: f64,
}

impl MetricSummary {
    pub fn from_episodes(rows: &[EpisodeMetrics]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("no evaluation episodes".into()));
        }
        let n = rows.len() as f64;
        Ok(Self {
            episodes: rows.len(),
            success_rate: rows.iter().filter(|r| r.success).count() as f64 / n,
            knock_impulse: mean_defined(rows.iter().map(|r| r.impulse)),
            energy_efficiency: mean_defined(rows.iter().map(|r| r.efficiency)),
            vertical_force_ratio: mean_defined(rows.iter().map(|r| r.vertical_force_ratio)),
            frechet: mean_defined(rows.iter().map(|r| r.frechet)),
            backswing_rate: rows.iter().filter(|r| r.backswing).count() as f64 / n,
        })
    }
}

pub const METRIC_ROWS: [&str; 4] = [
    "Knock Impulse",
    "Energy Efficiency",
    "Vertical Force Ratio",
    "Frechet Distance",
];

fn metric_values(s: &MetricSummary) -> [f64; 4] {
    [s.knock_impulse, s.energy_efficiency, s.vertical_force_ratio, s.frechet]
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "n/a".into()
    }
}

/// Comparison table with metrics as rows and methods as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub columns: Vec<(String, MetricSummary)>,
}

impl MetricsReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().map(|(name, _)| name.clone()));
        w.write_record(&header)?;
        for (k, row) in METRIC_ROWS.iter().enumerate() {
            let mut rec = vec![row.to_string()];
            rec.extend(self.columns.iter().map(|(_, s)| metric_values(s)[k].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let label_w = METRIC_ROWS.iter().map(|r| r.len()).max().unwrap_or(0).max("Metric".len());
        let cells: Vec<Vec<String>> = self
            .columns
            .iter()
            .map(|(_, s)| metric_values(s).iter().map(|&v| fmt_value(v)).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .zip(&cells)
            .map(|((name, _), c)| c.iter().map(|s| s.len()).max().unwrap_or(0).max(name.len()))
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}", "Metric");
        for ((name, _), w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, "  {name:>w$}");
        }
        out.push('\n');
        for (k, row) in METRIC_ROWS.iter().enumerate() {
            let _ = write!(out, "{row:<label_w$}");
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(out, "  {:>w$}", c[k]);
            }
            out.push('\n');
        }
        for (name, s) in &self.columns {
            let _ = writeln!(
                out,
                "{name}: {} episodes, success rate {:.3}, backswing rate {:.3}",
                s.episodes, s.success_rate, s.backswing_rate
            );
        }
        out
    }
}

/// Per-episode rows for one method.
pub fn write_episode_csv<W: Write>(writer: W, method: &str, rows: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "method",
        "episode",
        "success",
        "knock_impulse",
        "energy",
        "energy_efficiency",
        "vertical_force_ratio",
        "frechet",
        "backswing",
    ])?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([
            method.to_string(),
            i.to_string(),
            (r.success as u8).to_string(),
            r.impulse.to_string(),
            r.energy.to_string(),
            r.efficiency.to_string(),
            r.vertical_force_ratio.to_string(),
            r.frechet.to_string(),
            (r.backswing as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
