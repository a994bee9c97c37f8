//! Comparison methods: a direct path-planning PD controller and the
//! goal-reward-only ablation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Controller;
use crate::rewards::RewardWeights;
use crate::sim::{
    forward_kinematics, ik_damped_least_squares, in_collision, tool_angle, BodyPoint, IkTarget,
    Observation, SimConfig, SimState, Vec2, NUM_JOINTS,
};
use crate::trainer::TrainConfig;

/// Endpoint IK tolerance (m).
pub const PLAN_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DppcpConfig {
    /// Time to traverse the planned path (s).
    pub duration: f64,
    /// Distance of the planned head endpoint below the nail-head contact level (m).
    pub strike_depth: f64,
    /// Hammer-handle angle at the end of the path (rad).
    pub strike_tool_angle: f64,
}

impl Default for DppcpConfig {
    fn default() -> Self {
        Self {
            duration: 0.3,
            strike_depth: 0.03,
            strike_tool_angle: -0.5,
        }
    }
}

impl DppcpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.strike_depth >= 0.0 && self.strike_tool_angle.is_finite()) {
            return Err(Error::Config(
                "dppcp duration must be positive and strike_depth nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Joint targets for every control step along a straight hammer-head path.
#[derive(Debug, Clone, PartialEq)]
pub struct DppcpPlan {
    pub nail: Vec2,
    /// Planned head positions, one per control step, starting at home.
    pub head_path: Vec<Vec2>,
    /// PD targets; `targets[0]` is the home pose.
    pub targets: Vec<[f64; NUM_JOINTS]>,
    pub end_residual: f64,
}

impl DppcpPlan {
    /// Target for control step `k` (0-based); holds the final pose afterwards.
    pub fn target(&self, k: usize) -> [f64; NUM_JOINTS] {
        self.targets[(k + 1).min(self.targets.len() - 1)]
    }
}

fn cubic(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Plans from the home pose toward a point `strike_depth` below the nail
/// head along a straight line, with cubic time scaling.
pub fn plan_dppcp(cfg: &SimConfig, plan: &DppcpConfig, nail: Vec2) -> Result<DppcpPlan> {
    cfg.validate()?;
    plan.validate()?;
    let home = forward_kinematics(&cfg.home_pose, cfg).x_f;
    let angle0 = tool_angle(&cfg.home_pose, cfg);
    let end = nail + Vec2::new(0.0, cfg.head_radius - plan.strike_depth);
    let n = ((plan.duration / cfg.dt).round() as usize).max(1);
    let mut q = cfg.home_pose;
    let mut targets = vec![q];
    let mut head_path = vec![home];
    let mut end_residual = 0.0;
    for k in 1..=n {
        let s = cubic(k as f64 / n as f64);
        let p = home + (end - home) * s;
        let ik = [
            IkTarget::Point {
                point: BodyPoint::Head,
                target: p,
                weight: 1.0,
            },
            IkTarget::ToolAngle {
                target: angle0 + (plan.strike_tool_angle - angle0) * s,
                weight: 0.1,
            },
        ];
        // Position first; the handle angle is a soft preference.
        let sol = ik_damped_least_squares(cfg, &ik, q, 1e-3, 500, 1e-13);
        let pos = ik_damped_least_squares(
            cfg,
            &ik[..1],
            sol.q,
            1e-3,
            500,
            1e-13,
        );
        let reached = forward_kinematics(&pos.q, cfg).x_f;
        let err = (reached - p).norm();
        let limits_ok = (0..NUM_JOINTS).all(|i| cfg.joint_limits[i].contains(pos.q[i]));
        if err > PLAN_TOLERANCE || !limits_ok {
            return Err(Error::Planning(format!(
                "nail at ({:.3}, {:.3}) is unreachable: waypoint {k} misses by {err:.2e} m",
                nail.x, nail.y
            )));
        }
        if k < n && in_collision(&pos.q, cfg) {
            return Err(Error::Planning(format!("waypoint {k} collides with the table")));
        }
        q = pos.q;
        end_residual = err;
        targets.push(q);
        head_path.push(p);
    }
    Ok(DppcpPlan {
        nail,
        head_path,
        targets,
        end_residual,
    })
}

/// Replans on every reset from the true nail position.
#[derive(Debug, Clone)]
pub struct DppcpController {
    pub config: DppcpConfig,
    plan: Option<DppcpPlan>,
    step: usize,
}

impl DppcpController {
    pub fn new(config: DppcpConfig) -> Self {
        Self {
            config,
            plan: None,
            step: 0,
        }
    }

    pub fn plan(&self) -> Option<&DppcpPlan> {
        self.plan.as_ref()
    }
}

impl Controller for DppcpController {
    fn begin(&mut self, state: &SimState, cfg: &SimConfig) -> Result<()> {
        self.plan = Some(plan_dppcp(cfg, &self.config, state.nail_pos)?);
        self.step = 0;
        Ok(())
    }

    fn act(&mut self, _state: &SimState, _obs: &Observation) -> Result<[f64; NUM_JOINTS]> {
        let plan = self
            .plan
            .as_ref()
            .ok_or_else(|| Error::Contract("act called before begin".into()))?;
        let t = plan.target(self.step);
        self.step += 1;
        Ok(t)
    }
}

/// The ablation: no style reward and no discriminator updates; everything
/// else unchanged.
pub fn make_rl_noamp_config(train: &TrainConfig, weights: &RewardWeights) -> (TrainConfig, RewardWeights) {
    (
        TrainConfig {
            disc_updates: 0,
            ..train.clone()
        },
        RewardWeights {
            beta_s: 0.0,
            ..*weights
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{evaluate_controller, EvalSettings};
    use crate::sim::Termination;

    fn mid_nail(cfg: &SimConfig) -> Vec2 {
        cfg.nail_head(
            0.5 * (cfg.nail_x_range.low + cfg.nail_x_range.high),
            cfg.nail_height_range.low,
        )
    }

    #[test]
    fn plan_starts_home_and_ends_on_target() {
        let cfg = SimConfig::default();
        let plan = plan_dppcp(&cfg, &DppcpConfig::default(), mid_nail(&cfg)).unwrap();
        assert_eq!(plan.targets[0], cfg.home_pose);
        assert!(plan.end_residual <= PLAN_TOLERANCE);
        let end = forward_kinematics(plan.targets.last().unwrap(), &cfg).x_f;
        assert!((end.x - plan.nail.x).abs() <= cfg.capture_radius);
        assert!(end.y < plan.nail.y + cfg.head_radius);
    }

    #[test]
    fn plan_is_deterministic() {
        let cfg = SimConfig::default();
        let a = plan_dppcp(&cfg, &DppcpConfig::default(), mid_nail(&cfg)).unwrap();
        let b = plan_dppcp(&cfg, &DppcpConfig::default(), mid_nail(&cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unreachable_nail_is_a_planning_error() {
        let cfg = SimConfig::default();
        let r = plan_dppcp(&cfg, &DppcpConfig::default(), Vec2::new(2.0, 0.05));
        assert!(matches!(r, Err(Error::Planning(_))));
    }

    #[test]
    fn executed_plan_strikes_the_nail() {
        let cfg = SimConfig::default();
        let mut ctl = DppcpController::new(DppcpConfig::default());
        let rows = evaluate_controller(&mut ctl, &cfg, &EvalSettings { episodes: 100, seed: 2 }, &[]).unwrap();
        let done = rows.iter().filter(|r| r.termination == Termination::TaskDone).count();
        assert!(done >= 95, "{done}/100 task_done");
    }

    #[test]
    fn noamp_touches_only_the_adversarial_fields() {
        let (t, w) = make_rl_noamp_config(&TrainConfig::default(), &RewardWeights::default());
        assert_eq!(w.beta_s, 0.0);
        assert_eq!(w.alpha_g, 0.6);
        assert_eq!(t.disc_updates, 0);
        assert_eq!(
            TrainConfig {
                disc_updates: TrainConfig::default().disc_updates,
                ..t
            },
            TrainConfig::default()
        );
        assert_eq!(
            RewardWeights {
                beta_s: RewardWeights::default().beta_s,
                ..w
            },
            RewardWeights::default()
        );
    }
}
