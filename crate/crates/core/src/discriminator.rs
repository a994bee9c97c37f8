//! Least-squares adversarial discriminator over state transitions.
//!
//! Loss on a real batch `R` (reference motion) and a fake batch `F` (policy):
//!
//! ```text
//! L = mean_R (D − 1)² + mean_F (D + 1)² + (w_gp / 2) · mean_R ‖∇ D‖²
//! ```
//!
//! The penalty gradient is taken with respect to the (normalized) input by
//! default; [`PenaltyKind::Parameter`] penalizes the parameter gradient
//! instead.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{RunningNormalizer, Transition, TRANSITION_DIM};
use crate::nn::{
    backward_into, forward_cached, grad_penalty_with_value_into, init_params,
    param_grad_penalty_with_value_into, Adam, AdamConfig, Checkpoint, Dual, MlpSpec, ParamVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    /// `‖∇_x D‖²` at the real samples.
    Input,
    /// `‖∇_φ D‖²` at the real samples.
    Parameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub lr: f64,
    pub penalty: PenaltyKind,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            penalty: PenaltyKind::Input,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("discriminator lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Loss terms and their parameter gradient for one real/fake batch pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscLoss {
    pub loss: f64,
    pub real_term: f64,
    pub fake_term: f64,
    /// `mean_R ‖∇ D‖²` (before the `w_gp / 2` factor).
    pub penalty: f64,
    pub mean_real: f64,
    pub mean_fake: f64,
    pub grad: Vec<f64>,
}

impl DiscLoss {
    /// The two least-squares terms without the penalty.
    pub fn lsgan(&self) -> f64 {
        self.real_term + self.fake_term
    }
}

pub fn predict(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<f64> {
    Ok(forward_cached::<f64, f64>(spec, params, input)?.output()[0])
}

/// Loss and exact gradient on already-normalized inputs.
pub fn disc_loss_and_grads(
    spec: &MlpSpec,
    params: &[f64],
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    w_gp: f64,
    penalty: PenaltyKind,
) -> Result<DiscLoss> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::Empty("discriminator batches must be nonempty".into()));
    }
    if spec.output_dim() != 1 {
        return Err(Error::NonScalarOutput(spec.output_dim()));
    }
    let mut grad = vec![0.0; spec.num_params()];
    let nr = real.len() as f64;
    let nf = fake.len() as f64;
    let (mut real_term, mut fake_term, mut pen, mut sum_real, mut sum_fake) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut dual_scratch: Vec<Dual> = Vec::new();
    for x in real {
        let value_weight = |d: f64| 2.0 * (d - 1.0) / nr;
        let d = if w_gp > 0.0 {
            let scale = 0.5 * w_gp / nr;
            let (d, p) = match penalty {
                PenaltyKind::Input => grad_penalty_with_value_into(
                    spec,
                    params,
                    x,
                    scale,
                    value_weight,
                    &mut grad,
                    &mut dual_scratch,
                )?,
                PenaltyKind::Parameter => {
                    param_grad_penalty_with_value_into(spec, params, x, scale, value_weight, &mut grad)?
                }
            };
            pen += p;
            d
        } else {
            let cache = forward_cached::<f64, f64>(spec, params, x)?;
            let d = cache.output()[0];
            backward_into(spec, params, &cache, &[value_weight(d)], &mut grad);
            d
        };
        real_term += (d - 1.0) * (d - 1.0);
        sum_real += d;
    }
    for x in fake {
        let cache = forward_cached::<f64, f64>(spec, params, x)?;
        let d = cache.output()[0];
        backward_into(spec, params, &cache, &[2.0 * (d + 1.0) / nf], &mut grad);
        fake_term += (d + 1.0) * (d + 1.0);
        sum_fake += d;
    }
    real_term /= nr;
    fake_term /= nf;
    pen /= nr;
    Ok(DiscLoss {
        loss: real_term + fake_term + 0.5 * w_gp * pen,
        real_term,
        fake_term,
        penalty: pen,
        mean_real: sum_real / nr,
        mean_fake: sum_fake / nf,
        grad,
    })
}

/// Scalars recorded for each update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscStats {
    pub update: u64,
    pub loss: f64,
    pub lsgan: f64,
    pub penalty: f64,
    pub mean_real: f64,
    pub mean_fake: f64,
}

/// Network, optimizer state and the shared feature normalizer.
#[derive(Debug, Clone)]
pub struct Discriminator {
    spec: MlpSpec,
    params: ParamVector,
    normalizer: RunningNormalizer,
    adam: Adam,
    config: DiscriminatorConfig,
    w_gp: f64,
    updates: u64,
}

impl Discriminator {
    pub fn new(hidden: &[usize], config: DiscriminatorConfig, w_gp: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        if !(w_gp >= 0.0 && w_gp.is_finite()) {
            return Err(Error::Config(format!("w_gp must be nonnegative, got {w_gp}")));
        }
        let spec = MlpSpec::with_hidden(TRANSITION_DIM, hidden, 1)?;
        let params = init_params(&spec, seed);
        let adam = Adam::new(AdamConfig::with_lr(config.lr), spec.num_params());
        Ok(Self {
            spec,
            params,
            normalizer: RunningNormalizer::new(TRANSITION_DIM),
            adam,
            config,
            w_gp,
            updates: 0,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn normalizer(&self) -> &RunningNormalizer {
        &self.normalizer
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// `d = D(normalize(t))`.
    pub fn predict(&self, t: &Transition) -> f64 {
        let x = self.normalizer.normalize(t.as_slice());
        predict(&self.spec, &self.params.0, &x).expect("transition width matches the network")
    }

    fn normalized(&self, batch: &[Transition]) -> Vec<Vec<f64>> {
        batch.iter().map(|t| self.normalizer.normalize(t.as_slice())).collect()
    }

    /// Loss and gradient at the current parameters without updating anything.
    pub fn evaluate(&self, real: &[Transition], fake: &[Transition]) -> Result<DiscLoss> {
        disc_loss_and_grads(
            &self.spec,
            &self.params.0,
            &self.normalized(real),
            &self.normalized(fake),
            self.w_gp,
            self.config.penalty,
        )
    }

    /// Folds both batches into the normalizer, then takes one Adam step.
    pub fn update(&mut self, real: &[Transition], fake: &[Transition]) -> Result<DiscStats> {
        if real.is_empty() || fake.is_empty() {
            return Err(Error::Empty("discriminator batches must be nonempty".into()));
        }
        for t in real.iter().chain(fake) {
            if !t.is_finite() {
                return Err(Error::Contract("non-finite discriminator feature".into()));
            }
            self.normalizer.update(t.as_slice());
        }
        self.update_frozen(real, fake)
    }

    /// One Adam step with the normalizer held fixed.
    pub fn update_frozen(&mut self, real: &[Transition], fake: &[Transition]) -> Result<DiscStats> {
        let l = self.evaluate(real, fake)?;
        self.adam.step(&mut self.params.0, &l.grad);
        self.updates += 1;
        Ok(DiscStats {
            update: self.updates,
            loss: l.loss,
            lsgan: l.lsgan(),
            penalty: l.penalty,
            mean_real: l.mean_real,
            mean_fake: l.mean_fake,
        })
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        Checkpoint {
            name: "discriminator".into(),
            spec: self.spec.clone(),
            params: self.params.clone(),
            extra: self.normalizer.to_flat(),
            seed,
            step: self.updates,
        }
    }

    /// Restores parameters and normalizer statistics; optimizer state restarts.
    pub fn from_checkpoint(ckpt: &Checkpoint, config: DiscriminatorConfig, w_gp: f64) -> Result<Self> {
        if ckpt.spec.input_dim() != TRANSITION_DIM || ckpt.spec.output_dim() != 1 {
            return Err(Error::Checkpoint(format!(
                "discriminator checkpoint has layers {:?}",
                ckpt.spec.layer_sizes
            )));
        }
        ckpt.params.check(&ckpt.spec)?;
        let normalizer = RunningNormalizer::from_flat(TRANSITION_DIM, &ckpt.extra)?;
        Ok(Self {
            adam: Adam::new(AdamConfig::with_lr(config.lr), ckpt.spec.num_params()),
            spec: ckpt.spec.clone(),
            params: ckpt.params.clone(),
            normalizer,
            config,
            w_gp,
            updates: ckpt.step,
        })
    }
}

/// Appends per-update scalars as CSV rows.
pub struct DiscLogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DiscLogWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(["update", "loss", "lsgan", "penalty", "mean_d_real", "mean_d_fake"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, s: &DiscStats) -> Result<()> {
        self.inner.write_record([
            s.update.to_string(),
            s.loss.to_string(),
            s.lsgan.to_string(),
            s.penalty.to_string(),
            s.mean_real.to_string(),
            s.mean_fake.to_string(),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

impl DiscLogWriter<std::fs::File> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(std::fs::File::create(path)?)
    }
}
