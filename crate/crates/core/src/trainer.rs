//! Adversarial-motion-prior training loop: rollouts with style and goal
//! rewards, discriminator updates from the replay buffer, and PPO.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discriminator::{DiscStats, Discriminator, DiscriminatorConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate_policy, EvalSettings};
use crate::motion::{
    disc_features, sample_transitions, ReferenceTransitions, ReplayBuffer, RunningNormalizer,
    Transition,
};
use crate::nn::{backward_into, forward_cached, Adam, AdamConfig, GaussianPolicyHead};
use crate::policy::{Policy, PolicyConfig, ValueNet};
use crate::rewards::{goal_reward, style_reward, total_reward, RewardWeights};
use crate::sim::{episode_rng, keypoints, reset_with, step, SimConfig, Termination, Vec2, NUM_JOINTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Trajectories collected per training episode (m).
    pub trajectories_per_episode: usize,
    /// Discriminator updates per training episode (n).
    pub disc_updates: usize,
    /// Transitions per real and per fake discriminator batch (K).
    pub disc_batch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    /// Global gradient-norm clip for policy and value updates; 0 disables.
    pub max_grad_norm: f64,
    pub episodes: usize,
    /// Worker threads for rollout collection.
    pub workers: usize,
    pub seed: u64,
    pub replay_capacity: usize,
    /// Episodes between greedy evaluations for the log; 0 disables.
    pub eval_interval: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            trajectories_per_episode: 16,
            disc_updates: 4,
            disc_batch_size: 256,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            policy_lr: 3e-4,
            value_lr: 1e-3,
            epochs: 5,
            minibatch_size: 256,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            episodes: 500,
            workers: 1,
            seed: 0,
            replay_capacity: 100_000,
            eval_interval: 50,
            eval_episodes: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("trajectories_per_episode", self.trajectories_per_episode),
            ("disc_batch_size", self.disc_batch_size),
            ("epochs", self.epochs),
            ("minibatch_size", self.minibatch_size),
            ("episodes", self.episodes),
            ("workers", self.workers),
            ("replay_capacity", self.replay_capacity),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return Err(Error::Config("gamma and gae_lambda must lie in (0, 1]".into()));
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(Error::Config("clip_epsilon must be positive".into()));
        }
        if !(self.policy_lr > 0.0 && self.value_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.entropy_coef < 0.0 || self.max_grad_norm < 0.0 {
            return Err(Error::Config("entropy_coef and max_grad_norm must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetsConfig {
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl Default for NetsConfig {
    fn default() -> Self {
        Self {
            policy_hidden: vec![128, 64],
            value_hidden: vec![128, 64],
            discriminator_hidden: vec![256, 128],
        }
    }
}

/// Deterministic per-trajectory seed.
pub fn derive_seed(base: u64, episode: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(episode.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Scaled observation fed to the networks.
    pub input: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    pub r_g: f64,
    pub r_s: f64,
    pub r: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub transitions: Vec<Transition>,
    pub termination: Termination,
    /// `V(s_T)` for a truncated (timed-out) trajectory, else 0.
    pub bootstrap_value: f64,
    /// Control step (1-based) at which the nail was struck.
    pub contact_step: Option<usize>,
    pub contact_force: Option<Vec2>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Everything a rollout reads.
pub struct RolloutContext<'a> {
    pub policy: &'a Policy,
    pub value: &'a ValueNet,
    pub disc: &'a Discriminator,
    pub sim: &'a SimConfig,
    pub weights: &'a RewardWeights,
}

/// One trajectory from a fresh randomized reset. `seed` fixes the reset,
/// the observation noise and the action samples.
pub fn collect_trajectory(ctx: &RolloutContext<'_>, seed: u64, deterministic: bool) -> Result<Trajectory> {
    let mut env_rng = episode_rng(seed);
    let mut act_rng = ChaCha8Rng::seed_from_u64(seed);
    act_rng.set_stream(1);
    let (mut state, mut obs) = reset_with(ctx.sim, &mut env_rng)?;
    let mut steps = Vec::new();
    let mut transitions = Vec::new();
    loop {
        let out = ctx.policy.evaluate(&obs)?;
        let (action, log_prob) = if deterministic {
            let a = out.head.mean.clone();
            let lp = out.head.log_prob(&a);
            (a, lp)
        } else {
            out.head.sample(&mut act_rng)
        };
        let value = ctx.value.value(&out.input)?;
        let target = ctx.policy.joint_targets(&action);
        let next = step(&state, &target, ctx.sim, &mut env_rng)?;
        let transition = disc_features(&state.q, &next.state.q, ctx.sim);
        let d = ctx.disc.predict(&transition);
        let r_s = style_reward(d, ctx.weights);
        let kp = keypoints(&next.state, ctx.sim);
        let r_g = goal_reward(next.contact.as_ref(), kp.x_f, kp.x_c, ctx.weights);
        let r = total_reward(r_g, r_s, ctx.weights);
        if !(r.is_finite() && next.observation.is_finite()) {
            return Err(Error::Contract("non-finite reward or observation in rollout".into()));
        }
        steps.push(StepRecord {
            input: out.input,
            action,
            log_prob,
            value,
            r_g,
            r_s,
            r,
            d,
        });
        transitions.push(transition);
        state = next.state;
        obs = next.observation;
        if next.termination.is_terminal() {
            let bootstrap_value = if next.termination == Termination::Timeout {
                ctx.value.value(&ctx.policy.scale_observation(&obs))?
            } else {
                0.0
            };
            return Ok(Trajectory {
                steps,
                transitions,
                termination: next.termination,
                bootstrap_value,
                contact_step: next.contact.map(|c| c.step_index),
                contact_force: next.contact.map(|c| c.force_vec),
            });
        }
    }
}

/// Generalized advantage estimates and value targets.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    terminal_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return Err(Error::Dimension {
            expected: rewards.len(),
            got: values.len(),
        });
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { terminal_value };
        let delta = rewards[t] + gamma * next_value - values[t];
        gae = delta + gamma * lambda * gae;
        adv[t] = gae;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Normalizes to zero mean and unit standard deviation (population).
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if adv.len() < 2 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / sd;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub input: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob_old: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Clipped-surrogate loss (minus the entropy bonus) and its gradient with
/// respect to the policy's flat parameters (network weights, then log-std).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateOutput {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

pub fn surrogate_loss_and_grad(
    policy: &Policy,
    batch: &[PpoSample],
    clip_epsilon: f64,
    entropy_coef: f64,
) -> Result<SurrogateOutput> {
    if batch.is_empty() {
        return Err(Error::Empty("PPO batch is empty".into()));
    }
    let n_net = policy.spec.num_params();
    let mut grad = vec![0.0; n_net + NUM_JOINTS];
    let inv_n = 1.0 / batch.len() as f64;
    let (mut loss, mut clipped, mut kl) = (0.0, 0usize, 0.0);
    for s in batch {
        let cache = forward_cached::<f64, f64>(&policy.spec, &policy.params.0, &s.input)?;
        let head = GaussianPolicyHead::new(cache.output().to_vec(), policy.log_std.clone());
        let log_prob = head.log_prob(&s.action);
        let log_ratio = log_prob - s.log_prob_old;
        let ratio = log_ratio.exp();
        let a = s.advantage;
        let unclipped = ratio * a;
        let clipped_ratio = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
        let surrogate = unclipped.min(clipped_ratio * a);
        loss -= surrogate * inv_n;
        kl += ((ratio - 1.0) - log_ratio) * inv_n;
        let clip_active = (a > 0.0 && ratio > 1.0 + clip_epsilon) || (a < 0.0 && ratio < 1.0 - clip_epsilon);
        if clip_active {
            clipped += 1;
            continue;
        }
        // d(−ratio·A)/dθ = −A·ratio·∇ log π
        let w = -a * ratio * inv_n;
        let hg = head.log_prob_grad(&s.action);
        let mean_grad: Vec<f64> = hg.mean.iter().map(|g| g * w).collect();
        backward_into(&policy.spec, &policy.params.0, &cache, &mean_grad, &mut grad[..n_net]);
        for (g, h) in grad[n_net..].iter_mut().zip(&hg.log_std) {
            *g += w * h;
        }
    }
    if entropy_coef > 0.0 {
        let head = GaussianPolicyHead::new(vec![0.0; NUM_JOINTS], policy.log_std.clone());
        loss -= entropy_coef * head.entropy();
        for g in grad[n_net..].iter_mut() {
            *g -= entropy_coef;
        }
    }
    Ok(SurrogateOutput {
        loss,
        grad,
        clip_fraction: clipped as f64 * inv_n,
        approx_kl: kl,
    })
}

/// Mean squared value error and its gradient.
pub fn value_loss_and_grad(value: &ValueNet, batch: &[PpoSample]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("value batch is empty".into()));
    }
    let inv_n = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; value.spec.num_params()];
    let mut loss = 0.0;
    for s in batch {
        let v = value.accumulate_grad(&s.input, |v| 2.0 * (v - s.ret) * inv_n, &mut grad)?;
        loss += (v - s.ret) * (v - s.ret) * inv_n;
    }
    Ok((loss, grad))
}

fn clip_grad_norm(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Several epochs of shuffled minibatch Adam on the surrogate and value losses.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    policy: &mut Policy,
    value: &mut ValueNet,
    policy_adam: &mut Adam,
    value_adam: &mut Adam,
    samples: &[PpoSample],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PpoStats> {
    if samples.is_empty() {
        return Err(Error::Empty("PPO update without samples".into()));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut stats = PpoStats::default();
    let mut batches = 0usize;
    let mut flat = policy.flat_params();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let batch: Vec<PpoSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let mut s = surrogate_loss_and_grad(policy, &batch, cfg.clip_epsilon, cfg.entropy_coef)?;
            clip_grad_norm(&mut s.grad, cfg.max_grad_norm);
            policy_adam.step(&mut flat, &s.grad);
            policy.set_flat_params(&flat)?;
            let (vl, mut vg) = value_loss_and_grad(value, &batch)?;
            clip_grad_norm(&mut vg, cfg.max_grad_norm);
            value_adam.step(&mut value.params.0, &vg);
            stats.policy_loss += s.loss;
            stats.value_loss += vl;
            stats.clip_fraction += s.clip_fraction;
            stats.approx_kl += s.approx_kl;
            batches += 1;
        }
    }
    let b = batches as f64;
    stats.policy_loss /= b;
    stats.value_loss /= b;
    stats.clip_fraction /= b;
    stats.approx_kl /= b;
    Ok(stats)
}

/// Summary of one collected trajectory, kept for auditing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySummary {
    pub episode: usize,
    pub index: usize,
    pub steps: usize,
    pub termination: Termination,
    pub contact_step: Option<usize>,
    pub force_norm: f64,
    pub return_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_r_g: f64,
    pub mean_r_s: f64,
    pub disc_loss: f64,
    pub mean_d_real: f64,
    pub mean_d_fake: f64,
    pub success_rate: f64,
    /// Median greedy-policy path distance to the reference set; NaN when
    /// not evaluated this episode.
    pub frechet_eval: f64,
    pub ppo: PpoStats,
    pub trajectories: Vec<TrajectorySummary>,
    pub disc_steps: Vec<DiscStats>,
}

pub const TRAINING_LOG_HEADER: [&str; 8] = [
    "episode",
    "mean_r_g",
    "mean_r_s",
    "disc_loss",
    "mean_d_real",
    "mean_d_fake",
    "success_rate",
    "frechet_eval",
];

pub fn write_training_log<W: Write>(writer: W, rows: &[EpisodeStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAINING_LOG_HEADER)?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.mean_r_g.to_string(),
            r.mean_r_s.to_string(),
            r.disc_loss.to_string(),
            r.mean_d_real.to_string(),
            r.mean_d_fake.to_string(),
            r.success_rate.to_string(),
            r.frechet_eval.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_log<W: Write>(writer: W, rows: &[EpisodeStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "episode",
        "trajectory",
        "steps",
        "termination",
        "contact_step",
        "force_norm",
        "return",
    ])?;
    for t in rows.iter().flat_map(|r| &r.trajectories) {
        w.write_record([
            t.episode.to_string(),
            t.index.to_string(),
            t.steps.to_string(),
            t.termination.as_str().to_string(),
            t.contact_step.map_or(String::new(), |c| c.to_string()),
            t.force_norm.to_string(),
            t.return_r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Inputs shared by every training run.
#[derive(Debug, Clone)]
pub struct TrainerSetup {
    pub sim: SimConfig,
    pub weights: RewardWeights,
    pub train: TrainConfig,
    pub disc: DiscriminatorConfig,
    pub policy: PolicyConfig,
    pub nets: NetsConfig,
    /// Reference transitions (required when `disc_updates > 0`).
    pub reference: Option<ReferenceTransitions>,
    /// Reference hammer-head paths for the periodic evaluation.
    pub reference_paths: Vec<Vec<Vec2>>,
}

pub struct Trainer {
    setup: TrainerSetup,
    policy: Policy,
    value: ValueNet,
    disc: Discriminator,
    policy_adam: Adam,
    value_adam: Adam,
    buffer: ReplayBuffer,
    return_stats: RunningNormalizer,
    rng: ChaCha8Rng,
    pool: Option<rayon::ThreadPool>,
    episode: usize,
}

impl Trainer {
    pub fn new(setup: TrainerSetup) -> Result<Self> {
        setup.sim.validate()?;
        setup.weights.validate()?;
        setup.train.validate()?;
        setup.disc.validate()?;
        if setup.train.disc_updates > 0 && setup.reference.as_ref().is_none_or(|r| r.transitions().is_empty()) {
            return Err(Error::Config(
                "discriminator updates require a nonempty reference motion set".into(),
            ));
        }
        let seed = setup.train.seed;
        let policy = Policy::new(&setup.nets.policy_hidden, &setup.policy, &setup.sim, derive_seed(seed, 0, 1))?;
        let value = ValueNet::new(&setup.nets.value_hidden, derive_seed(seed, 0, 2))?;
        let disc = Discriminator::new(
            &setup.nets.discriminator_hidden,
            setup.disc.clone(),
            setup.weights.w_gp,
            derive_seed(seed, 0, 3),
        )?;
        let policy_adam = Adam::new(AdamConfig::with_lr(setup.train.policy_lr), policy.num_flat_params());
        let value_adam = Adam::new(AdamConfig::with_lr(setup.train.value_lr), value.spec.num_params());
        let buffer = ReplayBuffer::new(setup.train.replay_capacity)?;
        let pool = if setup.train.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(setup.train.workers)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 4)),
            setup,
            policy,
            value,
            disc,
            policy_adam,
            value_adam,
            buffer,
            return_stats: RunningNormalizer::new(1),
            pool,
            episode: 0,
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn value(&self) -> &ValueNet {
        &self.value
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.disc
    }

    pub fn setup(&self) -> &TrainerSetup {
        &self.setup
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    fn collect(&self) -> Result<Vec<Trajectory>> {
        let ctx = RolloutContext {
            policy: &self.policy,
            value: &self.value,
            disc: &self.disc,
            sim: &self.setup.sim,
            weights: &self.setup.weights,
        };
        let m = self.setup.train.trajectories_per_episode;
        let seed = self.setup.train.seed;
        let ep = self.episode as u64 + 1;
        let run = |i: usize| collect_trajectory(&ctx, derive_seed(seed, ep, i as u64 + 100), false);
        match &self.pool {
            Some(pool) => pool.install(|| (0..m).into_par_iter().map(run).collect()),
            None => (0..m).map(run).collect(),
        }
    }

    /// Reward scale: running standard deviation of the discounted return.
    fn reward_scale(&mut self, trajectories: &[Trajectory]) -> f64 {
        let gamma = self.setup.train.gamma;
        for t in trajectories {
            let mut ret = 0.0;
            for s in &t.steps {
                ret = gamma * ret + s.r;
                self.return_stats.update(&[ret]);
            }
        }
        if self.return_stats.count() < 2.0 {
            1.0
        } else {
            self.return_stats.std()[0].max(1e-8)
        }
    }

    pub fn train_episode(&mut self) -> Result<EpisodeStats> {
        let trajectories = self.collect()?;
        self.episode += 1;
        let episode = self.episode;
        let cfg = self.setup.train.clone();

        for t in &trajectories {
            self.buffer.store(&t.transitions);
        }

        let mut disc_steps = Vec::with_capacity(cfg.disc_updates);
        if cfg.disc_updates > 0 {
            let reference = self.setup.reference.as_ref().expect("checked at construction");
            for _ in 0..cfg.disc_updates {
                let real = sample_transitions(reference, cfg.disc_batch_size, &mut self.rng)?;
                let fake = sample_transitions(&self.buffer, cfg.disc_batch_size, &mut self.rng)?;
                disc_steps.push(self.disc.update(&real, &fake)?);
            }
        }

        let scale = self.reward_scale(&trajectories);
        let mut samples = Vec::new();
        for t in &trajectories {
            let rewards: Vec<f64> = t.steps.iter().map(|s| s.r / scale).collect();
            let values: Vec<f64> = t.steps.iter().map(|s| s.value).collect();
            let (adv, ret) = compute_gae(&rewards, &values, t.bootstrap_value, cfg.gamma, cfg.gae_lambda)?;
            for ((s, a), r) in t.steps.iter().zip(adv).zip(ret) {
                samples.push(PpoSample {
                    input: s.input.clone(),
                    action: s.action.clone(),
                    log_prob_old: s.log_prob,
                    advantage: a,
                    ret: r,
                });
            }
        }
        let mut adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
        normalize_advantages(&mut adv);
        for (s, a) in samples.iter_mut().zip(adv) {
            s.advantage = a;
        }
        let ppo = ppo_update(
            &mut self.policy,
            &mut self.value,
            &mut self.policy_adam,
            &mut self.value_adam,
            &samples,
            &cfg,
            &mut self.rng,
        )?;

        let steps: usize = trajectories.iter().map(|t| t.len()).sum();
        let mean = |f: &dyn Fn(&StepRecord) -> f64| {
            trajectories.iter().flat_map(|t| &t.steps).map(f).sum::<f64>() / steps.max(1) as f64
        };
        let disc_mean = |f: &dyn Fn(&DiscStats) -> f64| {
            if disc_steps.is_empty() {
                f64::NAN
            } else {
                disc_steps.iter().map(f).sum::<f64>() / disc_steps.len() as f64
            }
        };
        let successes = trajectories.iter().filter(|t| t.termination == Termination::TaskDone).count();
        let frechet_eval = if cfg.eval_interval > 0
            && (episode.is_multiple_of(cfg.eval_interval) || episode == cfg.episodes)
            && !self.setup.reference_paths.is_empty()
        {
            self.greedy_frechet()?
        } else {
            f64::NAN
        };
        let summaries = trajectories
            .iter()
            .enumerate()
            .map(|(index, t)| TrajectorySummary {
                episode,
                index,
                steps: t.len(),
                termination: t.termination,
                contact_step: t.contact_step,
                force_norm: t.contact_force.map_or(0.0, |f| f.norm()),
                return_r: t.steps.iter().map(|s| s.r).sum(),
            })
            .collect();
        Ok(EpisodeStats {
            episode,
            mean_r_g: mean(&|s| s.r_g),
            mean_r_s: mean(&|s| s.r_s),
            disc_loss: disc_mean(&|s| s.loss),
            mean_d_real: disc_mean(&|s| s.mean_real),
            mean_d_fake: disc_mean(&|s| s.mean_fake),
            success_rate: successes as f64 / trajectories.len() as f64,
            frechet_eval,
            ppo,
            trajectories: summaries,
            disc_steps,
        })
    }

    fn greedy_frechet(&self) -> Result<f64> {
        let settings = EvalSettings {
            episodes: self.setup.train.eval_episodes.max(1),
            seed: derive_seed(self.setup.train.seed, u64::MAX, 0),
        };
        let rows = evaluate_policy(&self.policy, &self.setup.sim, &settings, &self.setup.reference_paths)?;
        let mut f: Vec<f64> = rows.iter().map(|r| r.metrics.frechet).filter(|v| v.is_finite()).collect();
        Ok(median(&mut f))
    }

    /// Runs the configured number of episodes.
    pub fn train(&mut self, mut on_episode: impl FnMut(&EpisodeStats)) -> Result<Vec<EpisodeStats>> {
        let mut out = Vec::with_capacity(self.setup.train.episodes);
        while self.episode < self.setup.train.episodes {
            let stats = self.train_episode()?;
            on_episode(&stats);
            out.push(stats);
        }
        Ok(out)
    }
}

/// Median (NaN for an empty slice); sorts in place.
pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
