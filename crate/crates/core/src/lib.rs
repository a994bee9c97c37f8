//! Adversarial-motion-prior reinforcement learning for human-style hammering
//! on a planar three-link arm.

pub mod baselines;
pub mod config;
pub mod discriminator;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod error;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod policy;
pub mod rewards;
pub mod sim;
pub mod trainer;

pub use error::{Error, Result};
