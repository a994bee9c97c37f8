//! Diagonal Gaussian action distribution with a state-independent log-std.

use rand::Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicyHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

/// Partial derivatives of a scalar with respect to the head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrad {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianPolicyHead {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_std.len(), "mean/log_std width");
        Self { mean, log_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_std.iter().map(|l| l.exp())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> (Vec<f64>, f64) {
        let action: Vec<f64> = self
            .mean
            .iter()
            .zip(self.std())
            .map(|(&m, s)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s * z
            })
            .collect();
        let log_prob = self.log_prob(&action);
        (action, log_prob)
    }

    pub fn log_prob(&self, action: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(action)
            .map(|((&m, &ls), &a)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
    }

    pub fn log_prob_and_entropy(&self, action: &[f64]) -> (f64, f64) {
        (self.log_prob(action), self.entropy())
    }

    /// Gradient of `log_prob(action)` with respect to mean and log-std.
    pub fn log_prob_grad(&self, action: &[f64]) -> HeadGrad {
        let mut mean = Vec::with_capacity(self.dim());
        let mut log_std = Vec::with_capacity(self.dim());
        for ((&m, &ls), &a) in self.mean.iter().zip(&self.log_std).zip(action) {
            let inv_var = (-2.0 * ls).exp();
            let diff = a - m;
            mean.push(diff * inv_var);
            log_std.push(diff * diff * inv_var - 1.0);
        }
        HeadGrad { mean, log_std }
    }
}
