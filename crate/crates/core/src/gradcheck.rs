//! Central-difference checks of every analytic gradient in the crate.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discriminator::{disc_loss_and_grads, PenaltyKind};
use crate::error::Result;
use crate::nn::{backward_params, forward, forward_cached, grad_penalty_backward, input_gradient, MlpSpec, ParamVector};
use crate::policy::{Policy, PolicyConfig, ValueNet};
use crate::sim::{SimConfig, NUM_JOINTS};
use crate::trainer::{surrogate_loss_and_grad, value_loss_and_grad, PpoSample};

/// Relative-error bound every check must meet.
pub const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-6;

pub const CHECK_NAMES: [&str; 7] = [
    "nn_backward",
    "input_gradient",
    "double_backprop",
    "disc_loss_input_penalty",
    "disc_loss_param_penalty",
    "ppo_surrogate",
    "value_loss",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    pub max_rel_err: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checks: Vec<CheckResult>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<26} trials {:>4}  max rel err {:.3e}  {}",
                c.name,
                c.trials,
                c.max_rel_err,
                if c.passed() { "PASS" } else { "FAIL" }
            );
        }
        out
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a.abs().max(b.abs()) <= 1e-7 {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst component error between `analytic` and central differences of `f`.
fn compare(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut v = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        v[i] = x[i] + STEP;
        let up = f(&v);
        v[i] = x[i] - STEP;
        let down = f(&v);
        v[i] = x[i];
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * STEP)));
    }
    worst
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn corrupt(grad: &mut [f64], on: bool) {
    if on {
        if let Some(g) = grad.first_mut() {
            *g += 1e-2 * (1.0 + g.abs());
        }
    }
}

fn small_scalar_spec(rng: &mut ChaCha8Rng) -> Result<MlpSpec> {
    MlpSpec::new(vec![rng.random_range(1..=6), rng.random_range(1..=8), rng.random_range(1..=5), 1])
}

fn check_nn_backward(rng: &mut ChaCha8Rng, bad: bool) -> Result<f64> {
    let spec = MlpSpec::new(vec![rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=4)])?;
    let p = uniform(rng, spec.num_params(), -1.0, 1.0);
    let x = uniform(rng, spec.input_dim(), -2.0, 2.0);
    let w = uniform(rng, spec.output_dim(), -1.0, 1.0);
    let cache = forward_cached(&spec, &p, &x[..])?;
    let mut g = backward_params(&ParamVector(p.clone()), &spec, &cache, &w);
    corrupt(&mut g, bad);
    Ok(compare(&p, &g, |q| {
        forward(&ParamVector(q.to_vec()), &spec, &x)
            .expect("shape checked")
            .iter()
            .zip(&w)
            .map(|(a, b)| a * b)
            .sum()
    }))
}

fn check_input_gradient(rng: &mut ChaCha8Rng, bad: bool) -> Result<f64> {
    let spec = small_scalar_spec(rng)?;
    let p = ParamVector(uniform(rng, spec.num_params(), -1.0, 1.0));
    let x = uniform(rng, spec.input_dim(), -2.0, 2.0);
    let mut g = input_gradient(&p, &spec, &x)?;
    corrupt(&mut g, bad);
    Ok(compare(&x, &g, |y| forward(&p, &spec, y).expect("shape checked")[0]))
}

fn check_double_backprop(rng: &mut ChaCha8Rng, bad: bool) -> Result<f64> {
    let spec = small_scalar_spec(rng)?;
    let p = uniform(rng, spec.num_params(), -1.0, 1.0);
    let x = uniform(rng, spec.input_dim(), -2.0, 2.0);
    let (_, mut g) = grad_penalty_backward(&ParamVector(p.clone()), &spec, &x)?;
    corrupt(&mut g, bad);
    Ok(compare(&p, &g, |q| {
        input_gradient(&ParamVector(q.to_vec()), &spec, &x)
            .expect("shape checked")
            .iter()
            .map(|v| v * v)
            .sum()
    }))
}

fn check_disc_loss(rng: &mut ChaCha8Rng, kind: PenaltyKind, bad: bool) -> Result<f64> {
    let dim = rng.random_range(2..=8);
    let spec = MlpSpec::with_hidden(dim, &[rng.random_range(2..=6), rng.random_range(2..=5)], 1)?;
    let p = uniform(rng, spec.num_params(), -0.8, 0.8);
    let real: Vec<Vec<f64>> = (0..3).map(|_| uniform(rng, dim, -0.5, 1.5)).collect();
    let fake: Vec<Vec<f64>> = (0..4).map(|_| uniform(rng, dim, -1.5, 0.5)).collect();
    let w_gp = rng.random_range(0.0..2.0);
    let mut g = disc_loss_and_grads(&spec, &p, &real, &fake, w_gp, kind)?.grad;
    corrupt(&mut g, bad);
    Ok(compare(&p, &g, |q| {
        disc_loss_and_grads(&spec, q, &real, &fake, w_gp, kind)
            .expect("shape checked")
            .loss
    }))
}

fn ppo_instance(rng: &mut ChaCha8Rng) -> Result<(Policy, Vec<PpoSample>)> {
    let cfg = SimConfig::default();
    let mut policy = Policy::new(&[5, 4], &PolicyConfig::default(), &cfg, rng.random())?;
    let n = policy.spec.num_params();
    policy.params.0 = uniform(rng, n, -0.7, 0.7);
    policy.log_std = uniform(rng, NUM_JOINTS, -1.0, 0.3);
    let mut batch = Vec::with_capacity(4);
    for _ in 0..4 {
        let input = uniform(rng, policy.spec.input_dim(), -1.0, 1.0);
        let head = policy.head_for_input(&input)?;
        let (action, log_prob) = head.sample(rng);
        batch.push(PpoSample {
            input,
            action,
            log_prob_old: log_prob + rng.random_range(-0.3..0.3),
            advantage: rng.random_range(-2.0..2.0),
            ret: rng.random_range(-1.0..1.0),
        });
    }
    Ok((policy, batch))
}

fn check_ppo_surrogate(rng: &mut ChaCha8Rng, bad: bool) -> Result<f64> {
    let (mut policy, batch) = ppo_instance(rng)?;
    let entropy = if rng.random_bool(0.5) { 0.01 } else { 0.0 };
    let mut g = surrogate_loss_and_grad(&policy, &batch, 0.2, entropy)?.grad;
    corrupt(&mut g, bad);
    let flat = policy.flat_params();
    Ok(compare(&flat, &g, |q| {
        policy.set_flat_params(q).expect("same length");
        surrogate_loss_and_grad(&policy, &batch, 0.2, entropy)
            .expect("nonempty batch")
            .loss
    }))
}

fn check_value_loss(rng: &mut ChaCha8Rng, bad: bool) -> Result<f64> {
    let (_, batch) = ppo_instance(rng)?;
    let mut value = ValueNet::new(&[6, 5], rng.random())?;
    let (_, mut g) = value_loss_and_grad(&value, &batch)?;
    corrupt(&mut g, bad);
    let p = value.params.0.clone();
    Ok(compare(&p, &g, |q| {
        value.params.0.copy_from_slice(q);
        value_loss_and_grad(&value, &batch).expect("nonempty batch").0
    }))
}

/// Runs every named check over `trials` randomized instances. The check
/// named by `corrupt_check` has its analytic gradient perturbed, which must
/// make it fail.
pub fn run_gradient_checks(seed: u64, trials: usize, corrupt_check: Option<&str>) -> Result<GradCheckReport> {
    let mut checks = Vec::with_capacity(CHECK_NAMES.len());
    for (k, name) in CHECK_NAMES.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64 + 1) << 32));
        let bad = corrupt_check == Some(*name);
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let e = match *name {
                "nn_backward" => check_nn_backward(&mut rng, bad)?,
                "input_gradient" => check_input_gradient(&mut rng, bad)?,
                "double_backprop" => check_double_backprop(&mut rng, bad)?,
                "disc_loss_input_penalty" => check_disc_loss(&mut rng, PenaltyKind::Input, bad)?,
                "disc_loss_param_penalty" => check_disc_loss(&mut rng, PenaltyKind::Parameter, bad)?,
                "ppo_surrogate" => check_ppo_surrogate(&mut rng, bad)?,
                _ => check_value_loss(&mut rng, bad)?,
            };
            worst = worst.max(e);
        }
        checks.push(CheckResult {
            name: name.to_string(),
            trials,
            max_rel_err: worst,
        });
    }
    Ok(GradCheckReport { checks })
}
