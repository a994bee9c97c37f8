//! Reference clips: timestamped human and tool keypoints in the arm's plane.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::Vec2;

pub const CLIP_HEADER: [&str; 15] = [
    "t", "hip_x", "hip_y", "elbow_x", "elbow_y", "wrist_x", "wrist_y", "hand_x", "hand_y", "xg_x",
    "xg_y", "xf_x", "xf_y", "xm_x", "xm_y",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipFrame {
    pub t: f64,
    pub hip: Vec2,
    pub elbow: Vec2,
    pub wrist: Vec2,
    pub hand: Vec2,
    pub x_g: Vec2,
    pub x_f: Vec2,
    pub x_m: Vec2,
}

impl ClipFrame {
    fn values(&self) -> [f64; 15] {
        let p = [
            self.hip, self.elbow, self.wrist, self.hand, self.x_g, self.x_f, self.x_m,
        ];
        let mut out = [0.0; 15];
        out[0] = self.t;
        for (k, v) in p.iter().enumerate() {
            out[1 + 2 * k] = v.x;
            out[2 + 2 * k] = v.y;
        }
        out
    }

    fn from_values(v: &[f64; 15]) -> Self {
        let p = |k: usize| Vec2::new(v[1 + 2 * k], v[2 + 2 * k]);
        Self {
            t: v[0],
            hip: p(0),
            elbow: p(1),
            wrist: p(2),
            hand: p(3),
            x_g: p(4),
            x_f: p(5),
            x_m: p(6),
        }
    }
}

/// A nonempty clip with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    frames: Vec<ClipFrame>,
}

impl MotionClip {
    pub fn new(frames: Vec<ClipFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("motion clip has no frames".into()));
        }
        for (i, w) in frames.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::Contract(format!(
                    "timestamps must increase strictly (frame {} at t = {}, frame {} at t = {})",
                    i,
                    w[0].t,
                    i + 1,
                    w[1].t
                )));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[ClipFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.frames[self.frames.len() - 1].t - self.frames[0].t
    }

    /// Same keypoints played backwards over the same time span.
    pub fn reversed(&self) -> Self {
        let (t0, t1) = (self.frames[0].t, self.frames[self.frames.len() - 1].t);
        let frames = self
            .frames
            .iter()
            .rev()
            .map(|f| ClipFrame {
                t: t0 + (t1 - f.t),
                ..*f
            })
            .collect();
        Self { frames }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CLIP_HEADER)?;
        for f in &self.frames {
            w.write_record(f.values().iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a clip; `path` is only used to label errors.
    pub fn read_csv<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = r.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let mut columns = [0usize; 15];
        for (slot, name) in columns.iter_mut().zip(CLIP_HEADER) {
            *slot = header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))?;
        }
        let mut frames: Vec<ClipFrame> = Vec::new();
        for record in r.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let mut values = [0.0; 15];
            for (k, (&col, name)) in columns.iter().zip(CLIP_HEADER).enumerate() {
                let field = record
                    .get(col)
                    .ok_or_else(|| parse_err(line, format!("row has no `{name}` field")))?;
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("`{name}` is not a number: {field:?}")))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("`{name}` is not finite")));
                }
                values[k] = v;
            }
            let frame = ClipFrame::from_values(&values);
            if let Some(prev) = frames.last() {
                if !(frame.t > prev.t) {
                    return Err(parse_err(
                        line,
                        format!("timestamp {} does not increase (previous {})", frame.t, prev.t),
                    ));
                }
            }
            frames.push(frame);
        }
        if frames.is_empty() {
            return Err(parse_err(1, "clip has no frames".into()));
        }
        Ok(Self { frames })
    }
}

pub fn load_clip(path: &Path) -> Result<MotionClip> {
    MotionClip::read_csv(File::open(path)?, path)
}

pub fn write_clip(path: &Path, clip: &MotionClip) -> Result<()> {
    clip.write_csv(File::create(path)?)
}

/// Every `*.csv` directly under `dir`, in file-name order.
pub fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingDataset(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::MissingDataset(dir.to_path_buf()));
    }
    Ok(files)
}

pub fn load_dataset(dir: &Path) -> Result<Vec<MotionClip>> {
    dataset_files(dir)?.iter().map(|p| load_clip(p)).collect()
}
