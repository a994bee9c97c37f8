//! Noise-free evaluation episodes feeding the metric pipeline.

use crate::error::Result;
use crate::metrics::{EpisodeLog, EpisodeMetrics};
use crate::motion::MotionClip;
use crate::policy::Policy;
use crate::sim::{
    episode_rng, keypoints, reset_with, step, Observation, SimConfig, SimState, Termination, Vec2,
    NUM_JOINTS,
};
use crate::trainer::derive_seed;

/// Anything that maps the current state to PD joint targets.
pub trait Controller {
    /// Called after each reset, before the first action.
    fn begin(&mut self, state: &SimState, cfg: &SimConfig) -> Result<()>;
    fn act(&mut self, state: &SimState, obs: &Observation) -> Result<[f64; NUM_JOINTS]>;
}

/// Mean action of a trained policy.
pub struct PolicyController<'a> {
    pub policy: &'a Policy,
}

impl Controller for PolicyController<'_> {
    fn begin(&mut self, _state: &SimState, _cfg: &SimConfig) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _state: &SimState, obs: &Observation) -> Result<[f64; NUM_JOINTS]> {
        self.policy.act_deterministic(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub seed: u64,
    pub nail: Vec2,
    pub termination: Termination,
    pub contact_step: Option<usize>,
    pub steps: usize,
    pub log: EpisodeLog,
    pub metrics: EpisodeMetrics,
}

/// Seed of evaluation episode `index`.
pub fn eval_episode_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, 0x5EED_E7A1, index as u64)
}

/// The evaluation environment: identical to training but without
/// observation noise.
pub fn eval_sim(sim: &SimConfig) -> SimConfig {
    SimConfig {
        observation_noise: false,
        ..sim.clone()
    }
}

/// Runs one episode. The log starts with the reset sample (zero force and
/// torque) followed by one sample per control step.
pub fn run_episode(controller: &mut dyn Controller, sim: &SimConfig, seed: u64) -> Result<(EpisodeLog, SimState, Termination, Option<usize>)> {
    let mut rng = episode_rng(seed);
    let (mut state, mut obs) = reset_with(sim, &mut rng)?;
    controller.begin(&state, sim)?;
    let mut log = EpisodeLog::new(sim.dt);
    log.push(Vec2::zeros(), [0.0; NUM_JOINTS], state.qdot, keypoints(&state, sim).x_f);
    loop {
        let target = controller.act(&state, &obs)?;
        let out = step(&state, &target, sim, &mut rng)?;
        let force = out.contact.map_or(Vec2::zeros(), |c| c.force_vec);
        log.push(force, out.torque, out.state.qdot, keypoints(&out.state, sim).x_f);
        state = out.state;
        obs = out.observation;
        if out.termination.is_terminal() {
            let contact_step = out.contact.map(|c| c.step_index);
            return Ok((log, state, out.termination, contact_step));
        }
    }
}

/// Runs `settings.episodes` noise-free episodes and computes their metrics.
pub fn evaluate_controller(
    controller: &mut dyn Controller,
    sim: &SimConfig,
    settings: &EvalSettings,
    references: &[Vec<Vec2>],
) -> Result<Vec<EvalEpisode>> {
    let sim = eval_sim(sim);
    (0..settings.episodes)
        .map(|i| {
            let seed = eval_episode_seed(settings.seed, i);
            let (log, state, termination, contact_step) = run_episode(controller, &sim, seed)?;
            let metrics = EpisodeMetrics::compute(&log, termination == Termination::TaskDone, references)?;
            Ok(EvalEpisode {
                seed,
                nail: state.nail_pos,
                termination,
                contact_step,
                steps: state.episode_step,
                log,
                metrics,
            })
        })
        .collect()
}

pub fn evaluate_policy(
    policy: &Policy,
    sim: &SimConfig,
    settings: &EvalSettings,
    references: &[Vec<Vec2>],
) -> Result<Vec<EvalEpisode>> {
    evaluate_controller(&mut PolicyController { policy }, sim, settings, references)
}

/// Hammer-head paths of reference clips.
pub fn reference_paths(clips: &[MotionClip]) -> Vec<Vec<Vec2>> {
    clips.iter().map(|c| c.frames().iter().map(|f| f.x_f).collect()).collect()
}
