//! Experiment configuration, read from a TOML file with one section per
//! module. Every field has a default; an empty file is a valid config.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::oracle::OracleConfig;
use crate::questioner::{DecodeMode, GrammarConfig};
use crate::rewards::RewardConfig;
use crate::world::WorldConfig;

pub const CODE_VERSION: &str = concat!("vqg-core ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub baseline_lr: f64,
    pub baseline_hidden: usize,
    /// Weight of an entropy bonus on the policy objective. Off by default.
    pub entropy_bonus: f64,
    /// Standardize advantages within each batch. Off by default.
    pub normalize_advantages: bool,
    /// Write a checkpoint every this many epochs (0 = final only).
    pub checkpoint_every: usize,
    /// Episodes per update written to the episode log.
    pub log_episodes_per_update: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            lr: 0.001,
            batch_size: 64,
            epochs: 100,
            baseline_lr: 0.001,
            baseline_hidden: 32,
            entropy_bonus: 0.0,
            normalize_advantages: false,
            checkpoint_every: 10,
            log_episodes_per_update: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub expert_episodes: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// The scripted expert stops asking once the posterior maximum exceeds this.
    pub stop_threshold: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            expert_episodes: 2000,
            epochs: 20,
            lr: 0.001,
            batch_size: 64,
            stop_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_games: usize,
    pub modes: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_games: 2000,
            modes: vec!["sampling".into(), "greedy".into(), "beam5".into()],
        }
    }
}

impl EvalConfig {
    pub fn decode_modes(&self) -> Result<Vec<DecodeMode>> {
        self.modes.iter().map(|m| m.parse()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub seeds: Vec<u64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    /// Worker threads for rollouts and evaluation (0 = available cores).
    pub workers: usize,
    pub out_dir: String,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 1,
            workers: 0,
            out_dir: "runs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub checkpoint_dir: String,
    pub ledger: String,
    pub session_ttl_secs: u64,
    pub decode: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            checkpoint_dir: "checkpoints".into(),
            ledger: "study-ledger.jsonl".into(),
            session_ttl_secs: 30 * 60,
            decode: "greedy".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub world: WorldConfig,
    pub oracle: OracleConfig,
    pub grammar: GrammarConfig,
    pub rewards: RewardConfig,
    pub trainer: TrainerConfig,
    pub pretrain: PretrainConfig,
    pub eval: EvalConfig,
    pub ablation: AblationConfig,
    pub harness: HarnessConfig,
    pub service: ServiceConfig,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, "must be a finite value >= 0"))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::config(key, "must be >= 1"))
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.oracle.validate()?;
        self.rewards.validate()?;
        if self.grammar.m_max < 2 {
            return Err(Error::config("grammar.m_max", "must be >= 2"));
        }
        positive("trainer.lr", self.trainer.lr)?;
        at_least_one("trainer.batch_size", self.trainer.batch_size)?;
        positive("trainer.baseline_lr", self.trainer.baseline_lr)?;
        at_least_one("trainer.baseline_hidden", self.trainer.baseline_hidden)?;
        positive("trainer.entropy_bonus", self.trainer.entropy_bonus)?;
        positive("pretrain.lr", self.pretrain.lr)?;
        at_least_one("pretrain.batch_size", self.pretrain.batch_size)?;
        if !(0.0..=1.0).contains(&self.pretrain.stop_threshold) {
            return Err(Error::config("pretrain.stop_threshold", "must be in [0, 1]"));
        }
        at_least_one("eval.n_games", self.eval.n_games)?;
        self.eval.decode_modes()?;
        if self.eval.modes.is_empty() {
            return Err(Error::config("eval.modes", "at least one decode mode is required"));
        }
        self.service
            .decode
            .parse::<DecodeMode>()
            .map_err(|_| Error::config("service.decode", "must be sampling, greedy or beamN"))?;
        at_least_one("service.session_ttl_secs", self.service.session_ttl_secs as usize)?;
        // Building the grammar checks the templates against the world schema.
        crate::questioner::Grammar::build(&self.grammar, &self.world)?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn workers(&self) -> usize {
        if self.harness.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.harness.workers
        }
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    Config::from_toml_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = Config::from_toml_str("").unwrap();
        assert_eq!(cfg.rewards.j_max, 5);
        assert_eq!(cfg.grammar.m_max, 12);
        assert_eq!(cfg.rewards.lambda, 0.1);
        assert_eq!(cfg.rewards.eta, 0.1);
        assert_eq!(cfg.trainer.lr, 0.001);
        assert_eq!(cfg.trainer.batch_size, 64);
        assert_eq!(cfg.trainer.epochs, 100);
        assert_eq!(cfg.oracle.epsilon, 0.0);
        assert_eq!(cfg, Config::default());
    }

    #[test]
    fn negative_lambda_names_key() {
        let err = Config::from_toml_str("[rewards]\nlambda = -1.0\n").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { ref key, .. } if key == "rewards.lambda"), "{err}");
    }

    #[test]
    fn unknown_keys_are_reported() {
        let err = Config::from_toml_str("[rewards]\nlamda = 0.2\n").unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn round_trip() {
        let mut cfg = Config::default();
        cfg.oracle.epsilon = 0.1;
        cfg.trainer.lr = 0.05;
        cfg.ablation.seeds = vec![3, 4, 5];
        let back = Config::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
        assert_ne!(cfg.hash(), Config::default().hash());
    }

    #[test]
    fn epsilon_out_of_range() {
        let err = Config::from_toml_str("[oracle]\nepsilon = 1.0\n").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { ref key, .. } if key == "oracle.epsilon"));
    }
}
