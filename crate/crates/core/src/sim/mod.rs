//! Planar three-link arm holding a hammer above a nail.
//!
//! Coordinates: `x` along the table, `y` up; the table surface is `y = table_height`.
//! Joint angles are relative; link `k` points along the absolute angle
//! `q[0] + … + q[k]`, measured from `+x`. The hammer handle leaves the grasp
//! point at `grip_angle` relative to the last link.

mod dynamics;
mod env;
mod kinematics;
mod log;

pub use dynamics::{bias_forces, forward_dynamics, mass_matrix, mechanical_energy};
pub use env::{
    check_termination, contact_force, episode_rng, in_collision, keypoints, pd_torque, reset,
    reset_with, step, Env, StepOutcome,
};
pub use kinematics::{
    absolute_angles, arm_points, forward_kinematics, ik_damped_least_squares, keypoint_jacobian,
    point_bias_acceleration, point_position, tool_angle, ArmPoints, BodyPoint, IkSolution,
    IkTarget, ToolPose,
};
pub use log::{TrajectoryLog, TrajectoryRow};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

pub const NUM_JOINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.low..=self.high).contains(&v)
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low <= self.high) {
            return Err(Error::Config(format!(
                "{name}: interval [{}, {}] is empty or not finite",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub link_lengths: [f64; NUM_JOINTS],
    pub link_masses: [f64; NUM_JOINTS],
    /// Grasp point to hammer-head centre.
    pub hammer_length: f64,
    pub hammer_head_mass: f64,
    /// Handle direction relative to the last link (rad).
    pub grip_angle: f64,
    pub base_position: [f64; 2],
    pub table_height: f64,
    pub gravity: f64,
    pub nail_x_range: Interval,
    /// Height of the nail head above the table.
    pub nail_height_range: Interval,
    pub nail_stiffness: f64,
    pub nail_damping: f64,
    /// Horizontal distance from the nail axis within which the hammer head engages.
    pub capture_radius: f64,
    /// Hammer-head centre to striking face.
    pub head_radius: f64,
    /// Driving resistance of the nail (N·s/m): depth gained per unit impulse.
    pub nail_drive_resistance: f64,
    pub base_pd_gains: [PdGains; NUM_JOINTS],
    pub torque_limits: [f64; NUM_JOINTS],
    pub joint_limits: [Interval; NUM_JOINTS],
    pub joint_damping: [f64; NUM_JOINTS],
    pub home_pose: [f64; NUM_JOINTS],
    pub dt: f64,
    /// Physics substeps per control step.
    pub substeps: usize,
    pub max_steps: usize,
    pub friction_range: Interval,
    pub pd_gain_scale_range: Interval,
    pub cartesian_noise: f64,
    pub joint_noise: f64,
    pub observation_noise: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            link_lengths: [0.3, 0.3, 0.15],
            link_masses: [1.2, 0.9, 0.4],
            hammer_length: 0.25,
            hammer_head_mass: 0.5,
            grip_angle: std::f64::consts::FRAC_PI_2,
            base_position: [0.0, 0.25],
            table_height: 0.0,
            gravity: 9.81,
            nail_x_range: Interval::new(0.42, 0.52),
            nail_height_range: Interval::new(0.05, 0.05),
            nail_stiffness: 1.0e4,
            nail_damping: 40.0,
            capture_radius: 0.04,
            head_radius: 0.02,
            nail_drive_resistance: 200.0,
            base_pd_gains: [
                PdGains { kp: 120.0, kd: 6.0 },
                PdGains { kp: 80.0, kd: 4.0 },
                PdGains { kp: 30.0, kd: 1.0 },
            ],
            torque_limits: [40.0, 30.0, 12.0],
            joint_limits: [
                Interval::new(-0.5, 3.0),
                Interval::new(-2.8, 0.0),
                Interval::new(-2.5, 1.0),
            ],
            joint_damping: [0.05, 0.05, 0.02],
            home_pose: [1.6827, -2.0160, -1.2375],
            dt: 0.02,
            substeps: 10,
            max_steps: 152,
            friction_range: Interval::new(0.5, 1.25),
            pd_gain_scale_range: Interval::new(0.9, 1.1),
            cartesian_noise: 0.01,
            joint_noise: 0.02,
            observation_noise: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        for (i, &l) in self.link_lengths.iter().enumerate() {
            positive(&format!("link_lengths[{i}]"), l)?;
        }
        for (i, &m) in self.link_masses.iter().enumerate() {
            positive(&format!("link_masses[{i}]"), m)?;
        }
        positive("hammer_length", self.hammer_length)?;
        positive("hammer_head_mass", self.hammer_head_mass)?;
        positive("dt", self.dt)?;
        positive("capture_radius", self.capture_radius)?;
        positive("head_radius", self.head_radius)?;
        positive("nail_drive_resistance", self.nail_drive_resistance)?;
        if self.substeps == 0 || self.max_steps == 0 {
            return Err(Error::Config("substeps and max_steps must be at least 1".into()));
        }
        if self.nail_stiffness < 0.0 || self.nail_damping < 0.0 || self.gravity < 0.0 {
            return Err(Error::Config(
                "nail_stiffness, nail_damping and gravity must be nonnegative".into(),
            ));
        }
        if self.cartesian_noise < 0.0 || self.joint_noise < 0.0 {
            return Err(Error::Config("noise bounds must be nonnegative".into()));
        }
        self.nail_x_range.validate("nail_x_range")?;
        self.nail_height_range.validate("nail_height_range")?;
        self.friction_range.validate("friction_range")?;
        self.pd_gain_scale_range.validate("pd_gain_scale_range")?;
        for (i, lim) in self.joint_limits.iter().enumerate() {
            lim.validate(&format!("joint_limits[{i}]"))?;
            if !lim.contains(self.home_pose[i]) {
                return Err(Error::Config(format!(
                    "home_pose[{i}] = {} lies outside its joint limits",
                    self.home_pose[i]
                )));
            }
        }
        for (i, g) in self.base_pd_gains.iter().enumerate() {
            if g.kp < 0.0 || g.kd < 0.0 {
                return Err(Error::Config(format!("base_pd_gains[{i}] must be nonnegative")));
            }
        }
        for (i, &t) in self.torque_limits.iter().enumerate() {
            positive(&format!("torque_limits[{i}]"), t)?;
        }
        Ok(())
    }

    pub fn base(&self) -> Vec2 {
        Vec2::new(self.base_position[0], self.base_position[1])
    }

    /// Control period times the step budget.
    pub fn horizon(&self) -> f64 {
        self.dt * self.max_steps as f64
    }

    pub fn clamp_to_limits(&self, q: [f64; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
        std::array::from_fn(|i| q[i].clamp(self.joint_limits[i].low, self.joint_limits[i].high))
    }

    /// Nail head position for a given nail base `x` and height.
    pub fn nail_head(&self, x: f64, height: f64) -> Vec2 {
        Vec2::new(x, self.table_height + height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub q: [f64; NUM_JOINTS],
    pub qdot: [f64; NUM_JOINTS],
    /// Driven depth of the nail; never decreases within an episode.
    pub nail_depth: f64,
    /// Nail head position.
    pub nail_pos: Vec2,
    pub episode_step: usize,
    pub randomized_friction: f64,
    pub randomized_gain_scale: f64,
    pub contact_active: bool,
    pub prev_action: [f64; NUM_JOINTS],
    /// Set once the episode has terminated; further steps are rejected.
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoints {
    pub x_g: Vec2,
    pub x_f: Vec2,
    pub x_m: Vec2,
    pub x_c: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub hammer_pos: Vec2,
    pub nail_pos: Vec2,
    pub q: [f64; NUM_JOINTS],
    pub qdot: [f64; NUM_JOINTS],
    pub ee_orientation: f64,
    pub prev_action: [f64; NUM_JOINTS],
}

impl Observation {
    pub const DIM: usize = 14;

    /// Flat layout: hammer(2) nail(2) q(3) qdot(3) ee_orientation(1) prev_action(3).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::DIM);
        v.extend_from_slice(self.hammer_pos.as_slice());
        v.extend_from_slice(self.nail_pos.as_slice());
        v.extend_from_slice(&self.q);
        v.extend_from_slice(&self.qdot);
        v.push(self.ee_orientation);
        v.extend_from_slice(&self.prev_action);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    /// Force exerted on the nail (N).
    pub force_vec: Vec2,
    pub force_norm: f64,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    Running,
    TaskDone,
    Collision,
    Timeout,
}

impl Termination {
    pub fn is_terminal(self) -> bool {
        self != Termination::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Running => "running",
            Termination::TaskDone => "task_done",
            Termination::Collision => "collision",
            Termination::Timeout => "timeout",
        }
    }
}
