use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dynamics::forward_dynamics;
use super::kinematics::{arm_points, forward_kinematics, keypoint_jacobian, BodyPoint};
use super::{
    ContactEvent, Keypoints, Observation, SimConfig, SimState, Termination, Vec2, NUM_JOINTS,
};
use crate::error::{Error, Result};

/// RNG stream owned by one environment episode.
pub fn episode_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut impl Rng, low: f64, high: f64) -> f64 {
    if high > low {
        rng.random_range(low..=high)
    } else {
        low
    }
}

fn noise(rng: &mut impl Rng, bound: f64) -> f64 {
    uniform(rng, -bound, bound)
}

pub fn keypoints(state: &SimState, cfg: &SimConfig) -> Keypoints {
    let pose = forward_kinematics(&state.q, cfg);
    Keypoints {
        x_g: pose.x_g,
        x_f: pose.x_f,
        x_m: pose.x_m,
        x_c: state.nail_pos,
    }
}

fn observe(state: &SimState, cfg: &SimConfig, rng: &mut impl Rng) -> Observation {
    let pose = forward_kinematics(&state.q, cfg);
    let mut obs = Observation {
        hammer_pos: pose.x_f,
        nail_pos: state.nail_pos,
        q: state.q,
        qdot: state.qdot,
        ee_orientation: pose.ee_orientation,
        prev_action: state.prev_action,
    };
    if cfg.observation_noise {
        let (c, j) = (cfg.cartesian_noise, cfg.joint_noise);
        obs.hammer_pos += Vec2::new(noise(rng, c), noise(rng, c));
        obs.nail_pos += Vec2::new(noise(rng, c), noise(rng, c));
        for qi in &mut obs.q {
            *qi += noise(rng, j);
        }
        obs.ee_orientation += noise(rng, j);
    }
    obs
}

/// Starts an episode at the home pose with freshly randomized friction, PD
/// gain scale and nail position.
pub fn reset_with(cfg: &SimConfig, rng: &mut impl Rng) -> Result<(SimState, Observation)> {
    cfg.validate()?;
    let randomized_friction = uniform(rng, cfg.friction_range.low, cfg.friction_range.high);
    let randomized_gain_scale =
        uniform(rng, cfg.pd_gain_scale_range.low, cfg.pd_gain_scale_range.high);
    let nail_x = uniform(rng, cfg.nail_x_range.low, cfg.nail_x_range.high);
    let nail_h = uniform(rng, cfg.nail_height_range.low, cfg.nail_height_range.high);
    let state = SimState {
        q: cfg.home_pose,
        qdot: [0.0; NUM_JOINTS],
        nail_depth: 0.0,
        nail_pos: cfg.nail_head(nail_x, nail_h),
        episode_step: 0,
        randomized_friction,
        randomized_gain_scale,
        contact_active: false,
        prev_action: cfg.home_pose,
        done: false,
    };
    let obs = observe(&state, cfg, rng);
    Ok((state, obs))
}

pub fn reset(cfg: &SimConfig, seed: u64) -> Result<(SimState, Observation)> {
    reset_with(cfg, &mut episode_rng(seed))
}

/// `τ_i = s·Kp_i·(q*_i − q_i) − s·Kd_i·q̇_i` with the episode's gain scale `s`.
/// Actuator saturation is applied separately by [`step`].
pub fn pd_torque(q_target: &[f64; NUM_JOINTS], state: &SimState, cfg: &SimConfig) -> [f64; NUM_JOINTS] {
    let s = state.randomized_gain_scale;
    std::array::from_fn(|i| {
        let g = cfg.base_pd_gains[i];
        s * g.kp * (q_target[i] - state.q[i]) - s * g.kd * state.qdot[i]
    })
}

fn segments_intersect(a: (Vec2, Vec2), b: (Vec2, Vec2)) -> bool {
    let cross = |o: Vec2, p: Vec2, q: Vec2| (p - o).perp(&(q - o));
    let d1 = cross(b.0, b.1, a.0);
    let d2 = cross(b.0, b.1, a.1);
    let d3 = cross(a.0, a.1, b.0);
    let d4 = cross(a.0, a.1, b.1);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}

/// Any arm or hammer point below the table, or a self-intersecting chain.
pub fn in_collision(q: &[f64; NUM_JOINTS], cfg: &SimConfig) -> bool {
    let pts = arm_points(q, cfg);
    let below = [pts.elbow, pts.wrist, pts.grasp, pts.aux, pts.head]
        .iter()
        .any(|p| p.y < cfg.table_height);
    if below {
        return true;
    }
    let seg = pts.segments();
    // Only non-adjacent pairs can intersect properly.
    [(0, 2), (0, 3), (1, 3)]
        .iter()
        .any(|&(i, j)| segments_intersect(seg[i], seg[j]))
}

pub fn check_termination(
    state: &SimState,
    contact: Option<&ContactEvent>,
    cfg: &SimConfig,
) -> Termination {
    if contact.is_some() {
        Termination::TaskDone
    } else if in_collision(&state.q, cfg) {
        Termination::Collision
    } else if state.episode_step >= cfg.max_steps {
        Termination::Timeout
    } else {
        Termination::Running
    }
}

/// Spring-damper contact force on the nail. The head engages when it is
/// within `capture_radius` of the nail axis, its face (`head_radius` below
/// the head centre) has reached the nail head without passing through it,
/// and it is moving down. The force acts along the head velocity.
pub fn contact_force(head: Vec2, head_vel: Vec2, nail: Vec2, friction: f64, cfg: &SimConfig) -> Option<Vec2> {
    let penetration = nail.y + cfg.head_radius - head.y;
    let engaged = (head.x - nail.x).abs() <= cfg.capture_radius
        && (0.0..=2.0 * cfg.head_radius).contains(&penetration)
        && head_vel.y < 0.0;
    if !engaged {
        return None;
    }
    let speed = head_vel.norm();
    let magnitude = (cfg.nail_stiffness * penetration + cfg.nail_damping * speed) * friction;
    Some(head_vel / speed * magnitude)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: SimState,
    pub observation: Observation,
    pub contact: Option<ContactEvent>,
    pub termination: Termination,
    /// Applied joint torque averaged over the control period.
    pub torque: [f64; NUM_JOINTS],
}

/// Advances one control period: PD torques toward `action` (target joint
/// positions, clamped to the joint limits) integrated with semi-implicit
/// Euler over `substeps` physics steps.
pub fn step(
    state: &SimState,
    action: &[f64; NUM_JOINTS],
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> Result<StepOutcome> {
    if state.done || state.contact_active {
        return Err(Error::Contract("step called on a terminated episode".into()));
    }
    if state.episode_step >= cfg.max_steps {
        return Err(Error::Contract(format!(
            "step called at episode_step {} (max_steps {})",
            state.episode_step, cfg.max_steps
        )));
    }
    let target = cfg.clamp_to_limits(*action);
    let h = cfg.dt / cfg.substeps as f64;
    let mut next = state.clone();
    let mut torque_sum = [0.0; NUM_JOINTS];
    let mut taken = 0usize;
    let mut force = None;
    for _ in 0..cfg.substeps {
        let raw = pd_torque(&target, &next, cfg);
        let tau: [f64; NUM_JOINTS] =
            std::array::from_fn(|i| raw[i].clamp(-cfg.torque_limits[i], cfg.torque_limits[i]));
        let qdd = forward_dynamics(&next.q, &next.qdot, &tau, cfg);
        for i in 0..NUM_JOINTS {
            next.qdot[i] += h * qdd[i];
            next.q[i] += h * next.qdot[i];
            let lim = cfg.joint_limits[i];
            if next.q[i] < lim.low {
                next.q[i] = lim.low;
                next.qdot[i] = next.qdot[i].max(0.0);
            } else if next.q[i] > lim.high {
                next.q[i] = lim.high;
                next.qdot[i] = next.qdot[i].min(0.0);
            }
            torque_sum[i] += tau[i];
        }
        taken += 1;
        let head = forward_kinematics(&next.q, cfg).x_f;
        let jac = keypoint_jacobian(&next.q, cfg, BodyPoint::Head);
        let vel = jac * nalgebra::Vector3::from_column_slice(&next.qdot);
        force = contact_force(head, vel, next.nail_pos, next.randomized_friction, cfg);
        if force.is_some() || in_collision(&next.q, cfg) {
            break;
        }
    }
    next.episode_step += 1;
    next.prev_action = target;
    let contact = force.map(|force_vec| ContactEvent {
        force_vec,
        force_norm: force_vec.norm(),
        step_index: next.episode_step,
    });
    if let Some(c) = &contact {
        next.nail_depth += c.force_norm * cfg.dt / cfg.nail_drive_resistance;
        next.contact_active = true;
    }
    let termination = check_termination(&next, contact.as_ref(), cfg);
    next.done = termination.is_terminal();
    let observation = observe(&next, cfg, rng);
    let torque = std::array::from_fn(|i| torque_sum[i] / taken as f64);
    Ok(StepOutcome {
        state: next,
        observation,
        contact,
        termination,
        torque,
    })
}

/// A single environment instance owning its RNG stream.
#[derive(Debug, Clone)]
pub struct Env {
    config: SimConfig,
    state: SimState,
    rng: ChaCha8Rng,
}

impl Env {
    pub fn new(config: SimConfig, seed: u64) -> Result<Self> {
        let mut rng = episode_rng(seed);
        let (state, _) = reset_with(&config, &mut rng)?;
        Ok(Self { config, state, rng })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn keypoints(&self) -> Keypoints {
        keypoints(&self.state, &self.config)
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        self.rng = episode_rng(seed);
        let (state, obs) = reset_with(&self.config, &mut self.rng)?;
        self.state = state;
        Ok(obs)
    }

    /// Places the nail explicitly (after a reset).
    pub fn set_nail(&mut self, nail_pos: Vec2) {
        self.state.nail_pos = nail_pos;
    }

    pub fn observe(&mut self) -> Observation {
        observe(&self.state, &self.config, &mut self.rng)
    }

    pub fn step(&mut self, action: &[f64; NUM_JOINTS]) -> Result<StepOutcome> {
        let out = step(&self.state, action, &self.config, &mut self.rng)?;
        self.state = out.state.clone();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::mechanical_energy;
    use crate::sim::{Interval, PdGains};

    fn passive_cfg() -> SimConfig {
        SimConfig {
            base_pd_gains: [PdGains { kp: 0.0, kd: 0.0 }; 3],
            joint_damping: [0.0; 3],
            joint_limits: [Interval::new(-1e3, 1e3); 3],
            table_height: -10.0,
            nail_x_range: Interval::new(5.0, 5.0),
            observation_noise: false,
            ..SimConfig::default()
        }
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = SimConfig::default();
        assert_eq!(reset(&cfg, 7).unwrap(), reset(&cfg, 7).unwrap());
        assert_ne!(reset(&cfg, 7).unwrap().0, reset(&cfg, 8).unwrap().0);
    }

    #[test]
    fn randomization_stays_in_range() {
        let cfg = SimConfig::default();
        for seed in 0..10_000 {
            let (s, _) = reset(&cfg, seed).unwrap();
            assert!((0.5..=1.25).contains(&s.randomized_friction));
            assert!((0.9..=1.1).contains(&s.randomized_gain_scale));
            assert!(cfg.nail_x_range.contains(s.nail_pos.x));
            assert_eq!(s.q, cfg.home_pose);
        }
    }

    #[test]
    fn invalid_config_is_rejected_at_reset() {
        let cfg = SimConfig {
            link_lengths: [-0.3, 0.3, 0.15],
            ..SimConfig::default()
        };
        assert!(matches!(reset(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn pd_torque_cases() {
        let cfg = SimConfig {
            base_pd_gains: [PdGains { kp: 10.0, kd: 1.0 }; 3],
            ..SimConfig::default()
        };
        let (mut s, _) = reset(&cfg, 0).unwrap();
        s.randomized_gain_scale = 1.0;
        assert_eq!(pd_torque(&s.q, &s, &cfg), [0.0; 3]);
        let mut target = s.q;
        target[0] += 0.1;
        let tau = pd_torque(&target, &s, &cfg);
        assert!((tau[0] - 1.0).abs() < 1e-12);
        s.qdot = [0.5, -0.2, 0.3];
        let t1 = pd_torque(&target, &s, &cfg);
        s.randomized_gain_scale = 2.0;
        let t2 = pd_torque(&target, &s, &cfg);
        for i in 0..3 {
            assert!((t2[i] - 2.0 * t1[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_without_gravity_or_torque() {
        let cfg = SimConfig {
            gravity: 0.0,
            ..passive_cfg()
        };
        let (s, _) = reset(&cfg, 3).unwrap();
        let mut rng = episode_rng(0);
        let out = step(&s, &s.q, &cfg, &mut rng).unwrap();
        assert_eq!(out.state.q, s.q);
        assert_eq!(out.state.qdot, s.qdot);
        assert_eq!(out.state.episode_step, 1);
        assert_eq!(out.termination, Termination::Running);
    }

    #[test]
    fn energy_is_conserved_by_the_integrator() {
        let cfg = passive_cfg();
        let (mut s, _) = reset(&cfg, 1).unwrap();
        // Small swing about the hanging configuration keeps the chain clear of itself.
        s.q = [-std::f64::consts::FRAC_PI_2 + 0.4, 0.3, -0.3];
        let mut rng = episode_rng(0);
        // Reference scale: energy swing available to the chain.
        let mut energies = vec![mechanical_energy(&s.q, &s.qdot, &cfg)];
        for _ in 0..cfg.max_steps {
            let out = step(&s, &[0.0; 3], &cfg, &mut rng).unwrap();
            assert!(out.contact.is_none());
            s = out.state;
            energies.push(mechanical_energy(&s.q, &s.qdot, &cfg));
        }
        let total_mass: f64 = cfg.link_masses.iter().sum::<f64>() + cfg.hammer_head_mass;
        let reach: f64 = cfg.link_lengths.iter().sum::<f64>() + cfg.hammer_length;
        let scale = total_mass * cfg.gravity * reach;
        let worst_step = energies
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / scale)
            .fold(0.0, f64::max);
        assert!(worst_step <= 1e-3, "worst per-step drift {worst_step}");
    }

    #[test]
    fn contact_law_matches_spring_damper() {
        let cfg = SimConfig::default();
        let nail = Vec2::new(0.5, 0.05);
        let head = Vec2::new(0.51, 0.05 + cfg.head_radius - 0.004);
        let vel = Vec2::new(0.0, -2.0);
        let f = contact_force(head, vel, nail, 1.0, &cfg).unwrap();
        let expected = cfg.nail_stiffness * 0.004 + cfg.nail_damping * 2.0;
        assert!((f.norm() - expected).abs() < 1e-9);
        assert!(f.y < 0.0);
        assert!(contact_force(head, -vel, nail, 1.0, &cfg).is_none());
        let above = Vec2::new(0.5, 0.05 + cfg.head_radius + 1e-3);
        assert!(contact_force(above, vel, nail, 1.0, &cfg).is_none());
        let beside = Vec2::new(0.5 + cfg.capture_radius + 1e-3, 0.05);
        assert!(contact_force(beside, vel, nail, 1.0, &cfg).is_none());
    }

    #[test]
    fn termination_rules() {
        let cfg = SimConfig::default();
        let (mut s, _) = reset(&cfg, 0).unwrap();
        let event = ContactEvent {
            force_vec: Vec2::new(0.0, -50.0),
            force_norm: 50.0,
            step_index: 3,
        };
        assert_eq!(check_termination(&s, Some(&event), &cfg), Termination::TaskDone);
        assert_eq!(check_termination(&s, None, &cfg), Termination::Running);
        s.episode_step = 152;
        assert_eq!(check_termination(&s, None, &cfg), Termination::Timeout);
        s.episode_step = 10;
        // Hammer head pointed into the table far from the nail.
        s.q = [-0.1, 0.0, -2.2];
        assert!(forward_kinematics(&s.q, &cfg).x_f.y < cfg.table_height);
        assert_eq!(check_termination(&s, None, &cfg), Termination::Collision);
    }

    #[test]
    fn stepping_after_termination_is_rejected() {
        let cfg = SimConfig::default();
        let (mut s, _) = reset(&cfg, 0).unwrap();
        s.done = true;
        let mut rng = episode_rng(0);
        assert!(matches!(step(&s, &s.q.clone(), &cfg, &mut rng), Err(Error::Contract(_))));
        s.done = false;
        s.episode_step = cfg.max_steps;
        assert!(step(&s, &s.q.clone(), &cfg, &mut rng).is_err());
    }

    #[test]
    fn noise_free_observation_is_exact() {
        let cfg = SimConfig {
            observation_noise: false,
            ..SimConfig::default()
        };
        let (s, obs) = reset(&cfg, 5).unwrap();
        let pose = forward_kinematics(&s.q, &cfg);
        assert_eq!(obs.q, s.q);
        assert_eq!(obs.hammer_pos, pose.x_f);
        assert_eq!(obs.nail_pos, s.nail_pos);
        assert_eq!(obs.ee_orientation, pose.ee_orientation);
    }

    #[test]
    fn noisy_observation_stays_in_bounds() {
        let cfg = SimConfig::default();
        let mut env = Env::new(cfg.clone(), 9).unwrap();
        env.reset(9).unwrap();
        for _ in 0..40 {
            let target = cfg.home_pose;
            let out = env.step(&target).unwrap();
            let truth = out.state.clone();
            let pose = forward_kinematics(&truth.q, &cfg);
            let o = &out.observation;
            for i in 0..3 {
                assert!((o.q[i] - truth.q[i]).abs() <= cfg.joint_noise);
            }
            assert!((o.hammer_pos.x - pose.x_f.x).abs() <= cfg.cartesian_noise);
            assert!((o.hammer_pos.y - pose.x_f.y).abs() <= cfg.cartesian_noise);
            assert!((o.ee_orientation - pose.ee_orientation).abs() <= cfg.joint_noise);
            assert!(o.is_finite());
            if out.termination.is_terminal() {
                break;
            }
        }
    }

    #[test]
    fn identical_actions_give_identical_trajectories() {
        let cfg = SimConfig::default();
        let run = || {
            let mut env = Env::new(cfg.clone(), 0).unwrap();
            env.reset(21).unwrap();
            let mut out = Vec::new();
            for k in 0..60 {
                let a = [cfg.home_pose[0] - 0.01 * k as f64, cfg.home_pose[1], cfg.home_pose[2] - 0.02 * k as f64];
                let o = env.step(&a).unwrap();
                let done = o.termination.is_terminal();
                out.push(o);
                if done {
                    break;
                }
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn nail_depth_is_monotone_and_rigid_distances_hold() {
        let cfg = SimConfig::default();
        let mut env = Env::new(cfg.clone(), 0).unwrap();
        env.reset(2).unwrap();
        let mut depth = 0.0;
        for k in 0..152 {
            let a = [cfg.home_pose[0] - 0.02 * k as f64, cfg.home_pose[1] + 0.01 * k as f64, cfg.home_pose[2]];
            let o = env.step(&a).unwrap();
            assert!(o.state.nail_depth >= depth);
            depth = o.state.nail_depth;
            let p = forward_kinematics(&o.state.q, &cfg);
            assert!(((p.x_f - p.x_g).norm() - cfg.hammer_length).abs() < 1e-9);
            assert!(((p.x_m - p.x_g).norm() - 0.5 * cfg.hammer_length).abs() < 1e-9);
            if o.termination.is_terminal() {
                break;
            }
        }
    }
}
