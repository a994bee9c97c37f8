//! Direct-mapping retargeting of human keypoints onto the arm.
//!
//! The human hip is anchored to the arm's base joint: each frame is translated
//! so the hip lands on the base, then the remaining keypoints are matched by
//! damped-least-squares IK warm-started from the previous frame.

use crate::error::{Error, Result};
use crate::sim::{ik_damped_least_squares, BodyPoint, IkTarget, SimConfig, Vec2, NUM_JOINTS};

use super::clip::{ClipFrame, MotionClip};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HumanKeypoint {
    Elbow,
    Wrist,
    Hand,
    ToolGrasp,
    ToolHead,
    ToolAux,
}

impl HumanKeypoint {
    fn position(self, f: &ClipFrame) -> Vec2 {
        match self {
            HumanKeypoint::Elbow => f.elbow,
            HumanKeypoint::Wrist => f.wrist,
            HumanKeypoint::Hand => f.hand,
            HumanKeypoint::ToolGrasp => f.x_g,
            HumanKeypoint::ToolHead => f.x_f,
            HumanKeypoint::ToolAux => f.x_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointLink {
    pub human: HumanKeypoint,
    pub robot: BodyPoint,
    pub weight: f64,
}

/// Human-to-robot correspondence; the hip is always the base.
#[derive(Debug, Clone, PartialEq)]
pub struct RetargetMap {
    pub links: Vec<KeypointLink>,
    pub damping: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for RetargetMap {
    fn default() -> Self {
        let link = |human, robot| KeypointLink {
            human,
            robot,
            weight: 1.0,
        };
        Self {
            links: vec![
                link(HumanKeypoint::Elbow, BodyPoint::Elbow),
                link(HumanKeypoint::Wrist, BodyPoint::Wrist),
                link(HumanKeypoint::Hand, BodyPoint::Grasp),
                link(HumanKeypoint::ToolHead, BodyPoint::Head),
                link(HumanKeypoint::ToolAux, BodyPoint::Aux),
            ],
            damping: 1e-3,
            max_iters: 500,
            tol: 1e-13,
        }
    }
}

/// Longest distance from the base the point can reach.
fn reach(point: BodyPoint, cfg: &SimConfig) -> f64 {
    let l = cfg.link_lengths;
    match point {
        BodyPoint::Elbow => l[0],
        BodyPoint::Wrist => l[0] + l[1],
        BodyPoint::Grasp => l[0] + l[1] + l[2],
        BodyPoint::Aux => l[0] + l[1] + l[2] + 0.5 * cfg.hammer_length,
        BodyPoint::Head => l[0] + l[1] + l[2] + cfg.hammer_length,
        BodyPoint::LinkCom(k) => l[..k].iter().sum::<f64>() + 0.5 * l[k.min(NUM_JOINTS - 1)],
    }
}

/// Joint-space trajectory sampled every `dt` from `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub q: Vec<[f64; NUM_JOINTS]>,
}

impl JointTrajectory {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.q.len()).map(|k| self.t0 + k as f64 * self.dt)
    }
}

/// Per-frame IK at the clip's own timestamps.
pub fn retarget_frames(
    clip: &MotionClip,
    map: &RetargetMap,
    cfg: &SimConfig,
    init: [f64; NUM_JOINTS],
) -> Result<Vec<[f64; NUM_JOINTS]>> {
    let base = cfg.base();
    let slack = 1e-9;
    let mut q = init;
    let mut out = Vec::with_capacity(clip.len());
    for (frame, f) in clip.frames().iter().enumerate() {
        let shift = base - f.hip;
        let mut targets = Vec::with_capacity(map.links.len());
        for link in &map.links {
            let target = link.human.position(f) + shift;
            let dist = (target - base).norm();
            if dist > reach(link.robot, cfg) + slack {
                return Err(Error::Retarget {
                    frame,
                    msg: format!(
                        "{:?} target {:.4} m from the base exceeds reach {:.4} m",
                        link.human,
                        dist,
                        reach(link.robot, cfg)
                    ),
                });
            }
            targets.push(IkTarget::Point {
                point: link.robot,
                target,
                weight: link.weight,
            });
        }
        let sol = ik_damped_least_squares(cfg, &targets, q, map.damping, map.max_iters, map.tol);
        if sol.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Retarget {
                frame,
                msg: "inverse kinematics diverged".into(),
            });
        }
        q = sol.q;
        out.push(q);
    }
    Ok(out)
}

/// Linear interpolation of `samples` (at `times`) onto a uniform `dt` grid
/// starting at the first time. Grid points that coincide with a sample
/// (within 1e-9 s) take it exactly.
pub fn resample_uniform(times: &[f64], samples: &[[f64; NUM_JOINTS]], dt: f64) -> JointTrajectory {
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let n = (span / dt + 1e-9).floor() as usize + 1;
    let mut q = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        while j + 1 < times.len() && times[j + 1] <= t + 1e-9 {
            j += 1;
        }
        if (times[j] - t).abs() <= 1e-9 || j + 1 == times.len() {
            q.push(samples[j]);
        } else {
            let u = (t - times[j]) / (times[j + 1] - times[j]);
            q.push(std::array::from_fn(|i| {
                samples[j][i] + u * (samples[j + 1][i] - samples[j][i])
            }));
        }
    }
    JointTrajectory { t0, dt, q }
}

/// Retargets a clip and resamples it to the control period.
pub fn retarget(clip: &MotionClip, map: &RetargetMap, cfg: &SimConfig) -> Result<JointTrajectory> {
    let q = retarget_frames(clip, map, cfg, cfg.home_pose)?;
    let times: Vec<f64> = clip.frames().iter().map(|f| f.t).collect();
    Ok(resample_uniform(&times, &q, cfg.dt))
}
