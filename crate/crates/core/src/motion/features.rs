//! Discriminator features and the running normalizer shared by real and
//! generated transitions.
//!
//! Per-state layout: `[q0, q1, q2, tool_angle]` (rad). A transition
//! concatenates the state and its successor one control period later.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{tool_angle, SimConfig, NUM_JOINTS};

pub const STATE_FEATURE_DIM: usize = NUM_JOINTS + 1;
pub const TRANSITION_DIM: usize = 2 * STATE_FEATURE_DIM;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition(pub [f64; TRANSITION_DIM]);

impl Transition {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; TRANSITION_DIM] = v.try_into().map_err(|_| Error::Dimension {
            expected: TRANSITION_DIM,
            got: v.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

pub fn state_features(q: &[f64; NUM_JOINTS], cfg: &SimConfig) -> [f64; STATE_FEATURE_DIM] {
    [q[0], q[1], q[2], tool_angle(q, cfg)]
}

pub fn disc_features(q: &[f64; NUM_JOINTS], q_next: &[f64; NUM_JOINTS], cfg: &SimConfig) -> Transition {
    let a = state_features(q, cfg);
    let b = state_features(q_next, cfg);
    let mut out = [0.0; TRANSITION_DIM];
    out[..STATE_FEATURE_DIM].copy_from_slice(&a);
    out[STATE_FEATURE_DIM..].copy_from_slice(&b);
    Transition(out)
}

/// Welford running mean and variance per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNormalizer {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    min_std: f64,
}

impl RunningNormalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            min_std: 1e-3,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.count;
            *s += d * (v - *m);
        }
    }

    pub fn std(&self) -> Vec<f64> {
        self.m2
            .iter()
            .map(|s| {
                let var = if self.count > 1.0 { s / self.count } else { 1.0 };
                var.sqrt().max(self.min_std)
            })
            .collect()
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        if self.count < 2.0 {
            out.extend(x.iter().zip(&self.mean).map(|(v, m)| v - m));
            return;
        }
        for ((v, m), s) in x.iter().zip(&self.mean).zip(self.m2.iter()) {
            let sd = (s / self.count).sqrt().max(self.min_std);
            out.push((v - m) / sd);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        self.normalize_into(x, &mut out);
        out
    }

    /// Flat `[count, mean.., m2..]` for checkpointing.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = vec![self.count];
        v.extend_from_slice(&self.mean);
        v.extend_from_slice(&self.m2);
        v
    }

    pub fn from_flat(dim: usize, v: &[f64]) -> Result<Self> {
        if v.len() != 1 + 2 * dim {
            return Err(Error::Dimension {
                expected: 1 + 2 * dim,
                got: v.len(),
            });
        }
        let mut n = Self::new(dim);
        n.count = v[0];
        n.mean.copy_from_slice(&v[1..1 + dim]);
        n.m2.copy_from_slice(&v[1 + dim..]);
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_states_give_equal_halves() {
        let cfg = SimConfig::default();
        let q = [0.3, -1.1, 0.7];
        let t = disc_features(&q, &q, &cfg);
        assert_eq!(t.0[..STATE_FEATURE_DIM], t.0[STATE_FEATURE_DIM..]);
    }

    #[test]
    fn layout_is_fixed() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let q: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let t = disc_features(&q, &p, &cfg);
            assert_eq!(t.as_slice().len(), TRANSITION_DIM);
            assert_eq!(t.0[0..3], q);
            assert_eq!(t.0[4..7], p);
            assert!((t.0[3] - tool_angle(&q, &cfg)).abs() < 1e-15);
        }
    }

    #[test]
    fn z_scores_are_centred_on_a_stationary_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut norm = RunningNormalizer::new(3);
        let draw = |rng: &mut ChaCha8Rng| {
            vec![
                rng.random_range(4.0..6.0),
                -100.0 + 20.0 * rng.random::<f64>(),
                rng.random_range(-0.01..0.03),
            ]
        };
        for _ in 0..10_000 {
            let x = draw(&mut rng);
            norm.update(&x);
        }
        let mut sums = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..10_000 {
            let z = norm.normalize(&draw(&mut rng));
            for i in 0..3 {
                sums[i] += z[i];
                sq[i] += z[i] * z[i];
            }
        }
        for i in 0..3 {
            let m = sums[i] / 1e4;
            assert!(m.abs() <= 0.1, "dim {i}: mean {m}");
            let var = sq[i] / 1e4 - m * m;
            assert!((var - 1.0).abs() < 0.1, "dim {i}: var {var}");
        }
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.0, 8.0, -3.0];
        let mut n = RunningNormalizer::new(1);
        for x in xs {
            n.update(&[x]);
        }
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 5.0;
        assert!((n.mean()[0] - mean).abs() < 1e-12);
        assert!((n.std()[0] - var.sqrt()).abs() < 1e-12);
        let back = RunningNormalizer::from_flat(1, &n.to_flat()).unwrap();
        assert_eq!(back, n);
    }
}
