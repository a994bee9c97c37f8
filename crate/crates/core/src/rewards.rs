//! Goal, style and combined rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{ContactEvent, Vec2};

/// Manually determined reward coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub alpha_g: f64,
    pub beta_s: f64,
    pub gamma_d: f64,
    pub omega_f: f64,
    pub omega_d: f64,
    pub w_gp: f64,
    /// Desired contact force (N).
    pub f_d: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            alpha_g: 0.6,
            beta_s: 0.4,
            gamma_d: 0.25,
            omega_f: 1e5,
            omega_d: 1.0,
            w_gp: 1.0,
            f_d: 100.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_g,
            self.beta_s,
            self.gamma_d,
            self.omega_f,
            self.omega_d,
            self.w_gp,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("reward weights must be finite and nonnegative".into()));
        }
        if !(self.f_d > 0.0 && self.f_d.is_finite()) {
            return Err(Error::Config(format!("f_d must be positive, got {}", self.f_d)));
        }
        Ok(())
    }
}

/// `min(‖F‖/F_d, 1)` on contact, else 0.
pub fn force_reward(contact: Option<&ContactEvent>, w: &RewardWeights) -> f64 {
    contact.map_or(0.0, |c| (c.force_norm / w.f_d).min(1.0))
}

/// `1 − tanh(‖x_f − x_c‖)`.
pub fn distance_reward(x_f: Vec2, x_c: Vec2) -> f64 {
    1.0 - (x_f - x_c).norm().tanh()
}

pub fn goal_reward(contact: Option<&ContactEvent>, x_f: Vec2, x_c: Vec2, w: &RewardWeights) -> f64 {
    w.omega_f * force_reward(contact, w) + w.omega_d * distance_reward(x_f, x_c)
}

/// `max(0, 1 − γ_d·(d − 1)²)`; lies in `[0, 1]` and peaks at `d = 1`.
pub fn style_reward(d: f64, w: &RewardWeights) -> f64 {
    (1.0 - w.gamma_d * (d - 1.0) * (d - 1.0)).max(0.0)
}

pub fn total_reward(r_g: f64, r_s: f64, w: &RewardWeights) -> f64 {
    w.alpha_g * r_g + w.beta_s * r_s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn contact(f: f64) -> ContactEvent {
        ContactEvent {
            force_vec: Vec2::new(0.0, -f),
            force_norm: f,
            step_index: 1,
        }
    }

    #[test]
    fn goal_reward_cases() {
        let w = RewardWeights::default();
        let p = Vec2::new(0.4, 0.1);
        assert_eq!(goal_reward(None, p, p, &w), 1.0);
        let r_d = distance_reward(Vec2::new(1.0, 0.0), Vec2::zeros());
        assert!((r_d - 0.238_405_844_044_234).abs() < 1e-9);
        assert_eq!(force_reward(Some(&contact(50.0)), &w), 0.5);
        assert_eq!(force_reward(Some(&contact(150.0)), &w), 1.0);
        assert_eq!(force_reward(None, &w), 0.0);
    }

    #[test]
    fn style_reward_cases() {
        let w = RewardWeights::default();
        assert_eq!(style_reward(1.0, &w), 1.0);
        assert_eq!(style_reward(-1.0, &w), 0.0);
        assert_eq!(style_reward(0.0, &w), 0.75);
        assert_eq!(style_reward(0.5, &w), 0.9375);
    }

    #[test]
    fn total_reward_cases() {
        let w = RewardWeights::default();
        assert!((total_reward(0.0, 1.0, &w) - 0.4).abs() < 1e-15);
        assert!((total_reward(1.0, 1.0, &w) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_weights() {
        let w = RewardWeights {
            f_d: 0.0,
            ..RewardWeights::default()
        };
        assert!(w.validate().is_err());
        assert!(RewardWeights::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn style_reward_bounded(d in -1e6f64..1e6) {
            let r = style_reward(d, &RewardWeights::default());
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(r <= style_reward(1.0, &RewardWeights::default()));
        }

        #[test]
        fn distance_reward_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let ra = distance_reward(Vec2::new(a, 0.0), Vec2::zeros());
            let rb = distance_reward(Vec2::new(b, 0.0), Vec2::zeros());
            prop_assert!(ra > 0.0 && ra <= 1.0);
            if a < b { prop_assert!(ra >= rb); }
        }

        #[test]
        fn force_reward_monotone(a in 0.0f64..1e4, b in 0.0f64..1e4) {
            let w = RewardWeights::default();
            let ra = force_reward(Some(&contact(a)), &w);
            let rb = force_reward(Some(&contact(b)), &w);
            prop_assert!((0.0..=1.0).contains(&ra));
            if a <= b { prop_assert!(ra <= rb); }
        }

        #[test]
        fn total_reward_linear(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let w = RewardWeights::default();
            prop_assert_eq!(total_reward(2.0 * a, 2.0 * b, &w), 2.0 * total_reward(a, b, &w));
        }
    }
}
