//! Synthetic wind-up-then-strike reference motions.

use crate::error::{Error, Result};
use crate::sim::{
    arm_points, ik_damped_least_squares, tool_angle, BodyPoint, IkTarget, SimConfig, Vec2,
    NUM_JOINTS,
};

use super::clip::{ClipFrame, MotionClip};

/// Minimum rise above the starting height for a peak to count as a backswing.
pub const BACKSWING_MIN_RISE: f64 = 0.01;

/// Interior local maxima of `heights` that rise at least `min_rise` above
/// the first sample. Plateaus count once.
pub fn interior_maxima_above_start(heights: &[f64], min_rise: f64) -> usize {
    if heights.len() < 3 {
        return 0;
    }
    let start = heights[0];
    let n = heights.len();
    let mut count = 0;
    let mut i = 1;
    while i < n - 1 {
        if heights[i] > heights[i - 1] {
            // Walk across a plateau.
            let mut j = i;
            while j + 1 < n && heights[j + 1] == heights[i] {
                j += 1;
            }
            if j + 1 < n && heights[j + 1] < heights[i] && heights[i] >= start + min_rise {
                count += 1;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    count
}

/// The head-height scan shared by reference generation and evaluation.
pub fn has_backswing(heights: &[f64]) -> bool {
    interior_maxima_above_start(heights, BACKSWING_MIN_RISE) > 0
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Shape of one reference strike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    /// Wind-up rotation of the hammer about the grasp (rad).
    pub amplitude: f64,
    /// Fraction of the clip spent winding up.
    pub backswing_fraction: f64,
    pub duration: f64,
    pub nail: Vec2,
}

/// Hammer-head centre at the end of a strike: the face just below the nail head.
pub fn strike_head_position(nail: Vec2, cfg: &SimConfig) -> Vec2 {
    nail + Vec2::new(0.0, cfg.head_radius - 0.01)
}

/// Wind-up then strike toward the midpoint of the nail range.
pub fn generate_reference(
    amplitude: f64,
    backswing_fraction: f64,
    duration: f64,
    cfg: &SimConfig,
) -> Result<MotionClip> {
    let nail = cfg.nail_head(
        0.5 * (cfg.nail_x_range.low + cfg.nail_x_range.high),
        0.5 * (cfg.nail_height_range.low + cfg.nail_height_range.high),
    );
    generate_reference_with(
        &ReferenceSpec {
            amplitude,
            backswing_fraction,
            duration,
            nail,
        },
        cfg,
    )
}

/// Frames every `cfg.dt` from the home pose. During the wind-up the grasp
/// holds still while the hammer rotates up by `amplitude`; the strike then
/// carries the grasp and the hammer angle to the strike pose with an
/// accelerating (quadratic) profile.
pub fn generate_reference_with(spec: &ReferenceSpec, cfg: &SimConfig) -> Result<MotionClip> {
    if !(spec.duration > 0.0 && spec.duration <= 1.0) {
        return Err(Error::Config(format!(
            "reference duration must lie in (0, 1] s, got {}",
            spec.duration
        )));
    }
    if !(0.0..=1.0).contains(&spec.backswing_fraction) {
        return Err(Error::Config(format!(
            "backswing_fraction must lie in [0, 1], got {}",
            spec.backswing_fraction
        )));
    }
    cfg.validate()?;
    let home = arm_points(&cfg.home_pose, cfg);
    let angle0 = tool_angle(&cfg.home_pose, cfg);
    let angle_strike: f64 = 0.0;
    let head_strike = strike_head_position(spec.nail, cfg);
    let grasp_strike = head_strike - cfg.hammer_length * Vec2::new(angle_strike.cos(), angle_strike.sin());
    let grasp0 = home.grasp;

    let frames_n = (spec.duration / cfg.dt).round() as usize + 1;
    let windup = spec.backswing_fraction * spec.duration;
    let amplitude = if windup > 0.0 { spec.amplitude } else { 0.0 };
    let mut q: [f64; NUM_JOINTS] = cfg.home_pose;
    let mut frames = Vec::with_capacity(frames_n);
    for k in 0..frames_n {
        let t = k as f64 * cfg.dt;
        let (grasp, angle) = if t < windup {
            (grasp0, angle0 + amplitude * smoothstep(t / windup))
        } else {
            let span = spec.duration - windup;
            let u = if span > 0.0 { ((t - windup) / span).min(1.0) } else { 1.0 };
            let e = u * u;
            (
                grasp0 + (grasp_strike - grasp0) * e,
                angle0 + amplitude + (angle_strike - angle0 - amplitude) * e,
            )
        };
        let targets = [
            IkTarget::Point {
                point: BodyPoint::Grasp,
                target: grasp,
                weight: 1.0,
            },
            IkTarget::ToolAngle {
                target: angle,
                weight: 1.0,
            },
        ];
        let sol = ik_damped_least_squares(cfg, &targets, q, 1e-3, 500, 1e-13);
        if sol.residual > 1e-6 {
            return Err(Error::Planning(format!(
                "reference pose at t = {t:.3} s is unreachable (residual {:.2e})",
                sol.residual
            )));
        }
        q = sol.q;
        let p = arm_points(&q, cfg);
        frames.push(ClipFrame {
            t,
            hip: p.base,
            elbow: p.elbow,
            wrist: p.wrist,
            hand: p.grasp,
            x_g: p.grasp,
            x_f: p.head,
            x_m: p.aux,
        });
    }
    MotionClip::new(frames)
}

/// The default reference dataset: five wind-up strikes spread over the nail range.
pub fn default_reference_specs(cfg: &SimConfig) -> Vec<ReferenceSpec> {
    let shapes = [(0.9, 0.45, 0.8), (1.0, 0.4, 0.8), (1.1, 0.45, 0.9), (0.95, 0.5, 0.7), (1.05, 0.4, 0.85)];
    let n = shapes.len();
    shapes
        .iter()
        .enumerate()
        .map(|(i, &(amplitude, backswing_fraction, duration))| {
            let s = i as f64 / (n - 1) as f64;
            let x = cfg.nail_x_range.low + s * cfg.nail_x_range.width();
            let h = 0.5 * (cfg.nail_height_range.low + cfg.nail_height_range.high);
            ReferenceSpec {
                amplitude,
                backswing_fraction,
                duration,
                nail: cfg.nail_head(x, h),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::retarget::{retarget, RetargetMap};
    use crate::sim::in_collision;

    fn heights(clip: &MotionClip) -> Vec<f64> {
        clip.frames().iter().map(|f| f.x_f.y).collect()
    }

    #[test]
    fn no_backswing_descends_monotonically() {
        let cfg = SimConfig::default();
        let clip = generate_reference(1.0, 0.0, 0.8, &cfg).unwrap();
        let h = heights(&clip);
        assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{h:?}");
        assert_eq!(interior_maxima_above_start(&h, 0.0), 0);
        let home = arm_points(&cfg.home_pose, &cfg).head;
        assert!((clip.frames()[0].x_f - home).norm() < 1e-9);
    }

    #[test]
    fn windup_has_exactly_one_interior_peak() {
        let cfg = SimConfig::default();
        let clip = generate_reference(1.0, 0.4, 0.8, &cfg).unwrap();
        let h = heights(&clip);
        assert_eq!(interior_maxima_above_start(&h, 0.0), 1);
        assert!(has_backswing(&h));
    }

    #[test]
    fn reference_set_is_collision_free_and_retargets() {
        let cfg = SimConfig::default();
        for spec in default_reference_specs(&cfg) {
            let clip = generate_reference_with(&spec, &cfg).unwrap();
            assert!(clip.duration() < 1.0 + 1e-12);
            let traj = retarget(&clip, &RetargetMap::default(), &cfg).unwrap();
            assert_eq!(traj.len(), clip.len());
            for q in &traj.q {
                assert!(!in_collision(q, &cfg), "{q:?}");
            }
            let last = clip.frames().last().unwrap().x_f;
            assert!((last - strike_head_position(spec.nail, &cfg)).norm() < 1e-6);
        }
    }

    #[test]
    fn rejects_long_duration() {
        let cfg = SimConfig::default();
        assert!(generate_reference(1.0, 0.4, 1.5, &cfg).is_err());
    }

    #[test]
    fn peak_scan_cases() {
        assert_eq!(interior_maxima_above_start(&[0.0, 1.0, 0.0], 0.5), 1);
        assert_eq!(interior_maxima_above_start(&[0.0, 1.0, 1.0, 0.0], 0.5), 1);
        assert_eq!(interior_maxima_above_start(&[0.0, 1.0, 2.0], 0.5), 0);
        assert_eq!(interior_maxima_above_start(&[0.0, 0.2, 0.0], 0.5), 0);
        assert_eq!(interior_maxima_above_start(&[0.0, 1.0, 0.0, 1.0, 0.0], 0.5), 2);
        assert_eq!(interior_maxima_above_start(&[1.0, 0.5], 0.0), 0);
    }
}
