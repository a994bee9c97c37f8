//! Gaussian policy over PD joint targets, and the state-value network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    backward_into, forward_cached, init_params, Checkpoint, ForwardCache, GaussianPolicyHead,
    MlpSpec, ParamVector,
};
use crate::sim::{forward_kinematics, Observation, SimConfig, NUM_JOINTS};

/// Affine observation scaling fixed by the environment geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsScaler {
    offset: [f64; Observation::DIM],
    scale: [f64; Observation::DIM],
}

impl ObsScaler {
    pub fn new(cfg: &SimConfig) -> Self {
        let home = forward_kinematics(&cfg.home_pose, cfg);
        let nail_mid = cfg.nail_head(
            0.5 * (cfg.nail_x_range.low + cfg.nail_x_range.high),
            0.5 * (cfg.nail_height_range.low + cfg.nail_height_range.high),
        );
        let nail_half = |w: f64| (0.5 * w).max(0.05);
        let mut offset = [0.0; Observation::DIM];
        let mut scale = [1.0; Observation::DIM];
        offset[0] = home.x_f.x;
        offset[1] = home.x_f.y;
        scale[0] = 0.25;
        scale[1] = 0.25;
        offset[2] = nail_mid.x;
        offset[3] = nail_mid.y;
        scale[2] = nail_half(cfg.nail_x_range.width());
        scale[3] = nail_half(cfg.nail_height_range.width());
        for i in 0..NUM_JOINTS {
            offset[4 + i] = cfg.home_pose[i];
            scale[7 + i] = 5.0;
            offset[11 + i] = cfg.home_pose[i];
        }
        offset[10] = home.ee_orientation;
        Self { offset, scale }
    }

    pub fn apply(&self, obs: &Observation) -> Vec<f64> {
        obs.to_vec()
            .iter()
            .zip(&self.offset)
            .zip(&self.scale)
            .map(|((v, o), s)| (v - o) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Joint-target offset from the home pose per unit action (rad).
    pub action_scale: f64,
    pub init_std: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            action_scale: 1.0,
            init_std: 0.3,
        }
    }
}

/// Mean network plus a state-independent log-std.
#[derive(Debug, Clone)]
pub struct Policy {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub log_std: Vec<f64>,
    pub action_scale: f64,
    home: [f64; NUM_JOINTS],
    scaler: ObsScaler,
}

/// Policy evaluation at one observation.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub input: Vec<f64>,
    pub head: GaussianPolicyHead,
}

impl Policy {
    pub fn new(hidden: &[usize], config: &PolicyConfig, sim: &SimConfig, seed: u64) -> Result<Self> {
        if !(config.init_std > 0.0 && config.action_scale > 0.0) {
            return Err(Error::Config("init_std and action_scale must be positive".into()));
        }
        let spec = MlpSpec::with_hidden(Observation::DIM, hidden, NUM_JOINTS)?;
        let mut params = init_params(&spec, seed);
        // Start near the home pose: shrink the output layer.
        let last = *spec.layers().last().expect("at least one layer");
        for w in &mut params.0[last.weights..last.biases] {
            *w *= 0.01;
        }
        Ok(Self {
            spec,
            params,
            log_std: vec![config.init_std.ln(); NUM_JOINTS],
            action_scale: config.action_scale,
            home: sim.home_pose,
            scaler: ObsScaler::new(sim),
        })
    }

    /// Parameters followed by the log-std.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = self.params.0.clone();
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn set_flat_params(&mut self, v: &[f64]) -> Result<()> {
        let n = self.spec.num_params();
        if v.len() != n + NUM_JOINTS {
            return Err(Error::Dimension {
                expected: n + NUM_JOINTS,
                got: v.len(),
            });
        }
        self.params.0.copy_from_slice(&v[..n]);
        self.log_std.copy_from_slice(&v[n..]);
        Ok(())
    }

    pub fn num_flat_params(&self) -> usize {
        self.spec.num_params() + NUM_JOINTS
    }

    pub fn scale_observation(&self, obs: &Observation) -> Vec<f64> {
        self.scaler.apply(obs)
    }

    pub fn head_for_input(&self, input: &[f64]) -> Result<GaussianPolicyHead> {
        let cache = forward_cached::<f64, f64>(&self.spec, &self.params.0, input)?;
        Ok(GaussianPolicyHead::new(cache.output().to_vec(), self.log_std.clone()))
    }

    pub fn evaluate(&self, obs: &Observation) -> Result<PolicyOutput> {
        let input = self.scale_observation(obs);
        let head = self.head_for_input(&input)?;
        Ok(PolicyOutput { input, head })
    }

    /// PD joint targets for a raw action.
    pub fn joint_targets(&self, action: &[f64]) -> [f64; NUM_JOINTS] {
        std::array::from_fn(|i| self.home[i] + self.action_scale * action[i])
    }

    pub fn sample(&self, obs: &Observation, rng: &mut impl Rng) -> Result<(PolicyOutput, Vec<f64>, f64)> {
        let out = self.evaluate(obs)?;
        let (action, log_prob) = out.head.sample(rng);
        Ok((out, action, log_prob))
    }

    /// Mean action (evaluation mode).
    pub fn act_deterministic(&self, obs: &Observation) -> Result<[f64; NUM_JOINTS]> {
        let out = self.evaluate(obs)?;
        Ok(self.joint_targets(&out.head.mean))
    }

    pub fn to_checkpoint(&self, seed: u64, step: u64) -> Checkpoint {
        let mut extra = self.log_std.clone();
        extra.push(self.action_scale);
        Checkpoint {
            name: "policy".into(),
            spec: self.spec.clone(),
            params: self.params.clone(),
            extra,
            seed,
            step,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, sim: &SimConfig) -> Result<Self> {
        if ckpt.spec.input_dim() != Observation::DIM || ckpt.spec.output_dim() != NUM_JOINTS {
            return Err(Error::Checkpoint(format!(
                "policy checkpoint has layers {:?}; expected {} inputs and {} outputs",
                ckpt.spec.layer_sizes,
                Observation::DIM,
                NUM_JOINTS
            )));
        }
        if ckpt.extra.len() != NUM_JOINTS + 1 {
            return Err(Error::Checkpoint(format!(
                "policy checkpoint carries {} extra values, expected {}",
                ckpt.extra.len(),
                NUM_JOINTS + 1
            )));
        }
        ckpt.params.check(&ckpt.spec)?;
        Ok(Self {
            spec: ckpt.spec.clone(),
            params: ckpt.params.clone(),
            log_std: ckpt.extra[..NUM_JOINTS].to_vec(),
            action_scale: ckpt.extra[NUM_JOINTS],
            home: sim.home_pose,
            scaler: ObsScaler::new(sim),
        })
    }
}

/// Scalar state-value network on scaled observations.
#[derive(Debug, Clone)]
pub struct ValueNet {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl ValueNet {
    pub fn new(hidden: &[usize], seed: u64) -> Result<Self> {
        let spec = MlpSpec::with_hidden(Observation::DIM, hidden, 1)?;
        let params = init_params(&spec, seed);
        Ok(Self { spec, params })
    }

    pub fn value(&self, input: &[f64]) -> Result<f64> {
        Ok(forward_cached::<f64, f64>(&self.spec, &self.params.0, input)?.output()[0])
    }

    /// Adds `weight · ∇_φ V(input)` into `grad` and returns `V(input)`.
    pub fn accumulate_grad(&self, input: &[f64], weight: impl Fn(f64) -> f64, grad: &mut [f64]) -> Result<f64> {
        let cache: ForwardCache<f64> = forward_cached(&self.spec, &self.params.0, input)?;
        let v = cache.output()[0];
        backward_into(&self.spec, &self.params.0, &cache, &[weight(v)], grad);
        Ok(v)
    }

    pub fn to_checkpoint(&self, seed: u64, step: u64) -> Checkpoint {
        Checkpoint {
            name: "value".into(),
            spec: self.spec.clone(),
            params: self.params.clone(),
            extra: Vec::new(),
            seed,
            step,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::reset;

    #[test]
    fn home_observation_scales_near_zero() {
        let cfg = SimConfig {
            observation_noise: false,
            ..SimConfig::default()
        };
        let (_, obs) = reset(&cfg, 3).unwrap();
        let x = ObsScaler::new(&cfg).apply(&obs);
        assert_eq!(x.len(), Observation::DIM);
        for (i, v) in x.iter().enumerate() {
            if i == 2 {
                assert!(v.abs() <= 1.0 + 1e-12);
            } else {
                assert!(v.abs() < 1e-9, "component {i} = {v}");
            }
        }
    }

    #[test]
    fn fresh_policy_targets_home() {
        let cfg = SimConfig {
            observation_noise: false,
            ..SimConfig::default()
        };
        let p = Policy::new(&[32, 16], &PolicyConfig::default(), &cfg, 1).unwrap();
        let (_, obs) = reset(&cfg, 0).unwrap();
        let q = p.act_deterministic(&obs).unwrap();
        for i in 0..NUM_JOINTS {
            assert!((q[i] - cfg.home_pose[i]).abs() < 0.05);
        }
        assert!((p.log_std[0].exp() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = SimConfig::default();
        let p = Policy::new(&[8], &PolicyConfig::default(), &cfg, 4).unwrap();
        let ckpt = Checkpoint::from_bytes(&p.to_checkpoint(4, 10).to_bytes()).unwrap();
        let back = Policy::from_checkpoint(&ckpt, &cfg).unwrap();
        assert_eq!(back.flat_params(), p.flat_params());
        let value_ckpt = ValueNet::new(&[8], 1).unwrap().to_checkpoint(1, 0);
        assert!(Policy::from_checkpoint(&value_ckpt, &cfg).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let cfg = SimConfig::default();
        let mut p = Policy::new(&[4], &PolicyConfig::default(), &cfg, 2).unwrap();
        let mut v = p.flat_params();
        v[0] = 9.0;
        *v.last_mut().unwrap() = -1.0;
        p.set_flat_params(&v).unwrap();
        assert_eq!(p.flat_params(), v);
        assert!(p.set_flat_params(&v[1..]).is_err());
    }
}
