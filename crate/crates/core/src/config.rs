//! Experiment configuration: one TOML document with every section defaulted.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{make_rl_noamp_config, DppcpConfig};
use crate::discriminator::DiscriminatorConfig;
use crate::error::{Error, Result};
use crate::policy::PolicyConfig;
use crate::rewards::RewardWeights;
use crate::sim::SimConfig;
use crate::trainer::{NetsConfig, TrainConfig};

/// File name of the configuration snapshot written into every output directory.
pub const SNAPSHOT_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Hmamp,
    RlNoamp,
    Dppcp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Hmamp, Method::Dppcp, Method::RlNoamp];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hmamp => "hmamp",
            Method::RlNoamp => "rl-noamp",
            Method::Dppcp => "dppcp",
        }
    }

    /// Column heading in metric reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::Hmamp => "HMAMP",
            Method::RlNoamp => "RL-noAMP",
            Method::Dppcp => "DPPCP",
        }
    }

    pub fn is_learned(self) -> bool {
        self != Method::Dppcp
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmamp" => Ok(Method::Hmamp),
            "rl-noamp" => Ok(Method::RlNoamp),
            "dppcp" => Ok(Method::Dppcp),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected hmamp, rl-noamp or dppcp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Directory of reference motion clips (CSV).
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub env: SimConfig,
    pub rewards: RewardWeights,
    pub nets: NetsConfig,
    pub training: TrainConfig,
    pub discriminator: DiscriminatorConfig,
    pub policy: PolicyConfig,
    pub dppcp: DppcpConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Hmamp,
            dataset: PathBuf::from("data/reference"),
            out: PathBuf::from("runs/default"),
            env: SimConfig::default(),
            rewards: RewardWeights::default(),
            nets: NetsConfig::default(),
            training: TrainConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            policy: PolicyConfig::default(),
            dppcp: DppcpConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The fully defaulted document.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.rewards.validate()?;
        self.training.validate()?;
        self.discriminator.validate()?;
        self.dppcp.validate()?;
        if self.eval.episodes == 0 {
            return Err(Error::Config("eval.episodes must be at least 1".into()));
        }
        Ok(())
    }

    /// Training and reward settings actually used by `method`.
    pub fn effective_training(&self) -> (TrainConfig, RewardWeights) {
        match self.method {
            Method::RlNoamp => make_rl_noamp_config(&self.training, &self.rewards),
            _ => (self.training.clone(), self.rewards),
        }
    }

    /// Writes the snapshot into `dir` and returns its path.
    pub fn write_snapshot(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(SNAPSHOT_FILE);
        std::fs::write(&path, self.to_toml()?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn snapshot_round_trips_exactly() {
        let mut cfg = ExperimentConfig::default();
        cfg.method = Method::RlNoamp;
        cfg.training.seed = 7;
        cfg.env.nail_x_range.low = 0.4312345678901234;
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn partial_document_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("method = \"dppcp\"\n[training]\nepisodes = 3\n").unwrap();
        assert_eq!(cfg.method, Method::Dppcp);
        assert_eq!(cfg.training.episodes, 3);
        assert_eq!(cfg.training.gamma, 0.99);
        assert_eq!(cfg.rewards, RewardWeights::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("[training]\nepisodez = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("[training]\ngamma = 1.5\n").is_err());
        assert!(ExperimentConfig::from_toml("method = \"other\"\n").is_err());
    }

    #[test]
    fn noamp_differs_in_exactly_two_fields() {
        let cfg = ExperimentConfig {
            method: Method::RlNoamp,
            ..ExperimentConfig::default()
        };
        let (t, w) = cfg.effective_training();
        #[derive(Serialize)]
        struct Pair {
            training: TrainConfig,
            rewards: RewardWeights,
        }
        let base = toml::to_string(&Pair {
            training: cfg.training.clone(),
            rewards: cfg.rewards,
        })
        .unwrap();
        let noamp = toml::to_string(&Pair { training: t, rewards: w }).unwrap();
        let diff: Vec<(&str, &str)> = base.lines().zip(noamp.lines()).filter(|(a, b)| a != b).collect();
        assert_eq!(diff.len(), 2, "{diff:?}");
        assert!(diff.iter().any(|(a, _)| a.starts_with("disc_updates")));
        assert!(diff.iter().any(|(a, _)| a.starts_with("beta_s")));
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
    }
}
