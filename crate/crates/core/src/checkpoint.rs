//! Single-file checkpoints: a magic string, a format version, a JSON header
//! and the raw little-endian parameters of the policy and the baseline.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Config, CODE_VERSION};
use crate::error::{Error, Result};
use crate::questioner::grammar::GrammarSnapshot;
use crate::questioner::{Grammar, Policy};
use crate::trainer::baseline::BaselineNet;

const MAGIC: &[u8; 8] = b"VQGCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub code_version: String,
    pub config_hash: String,
    pub config: String,
    pub grammar: GrammarSnapshot,
    pub grammar_hash: String,
    pub vocab_size: usize,
    pub feature_dim: usize,
    pub baseline_hidden: Option<usize>,
    /// Completed epochs. Together with the master seed this fixes every
    /// random stream of the remaining run.
    pub epoch: usize,
    pub master_seed: u64,
    /// Plain SGD keeps no state beyond the parameters.
    pub optimizer: String,
    /// Free-form label, e.g. the reward variant.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub policy: Policy,
    pub baseline: Option<BaselineNet>,
}

impl Checkpoint {
    pub fn new(
        config: &Config,
        grammar: &Grammar,
        policy: Policy,
        baseline: Option<BaselineNet>,
        epoch: usize,
        master_seed: u64,
        label: &str,
    ) -> Self {
        Checkpoint {
            header: CheckpointHeader {
                code_version: CODE_VERSION.to_string(),
                config_hash: config.hash(),
                config: config.to_toml_string(),
                grammar: grammar.snapshot(),
                grammar_hash: grammar.hash(),
                vocab_size: policy.vocab_size(),
                feature_dim: policy.feature_dim(),
                baseline_hidden: baseline.as_ref().map(BaselineNet::hidden),
                epoch,
                master_seed,
                optimizer: "sgd".into(),
                label: label.to_string(),
            },
            policy,
            baseline,
        }
    }

    pub fn grammar(&self) -> Result<Grammar> {
        let g = Grammar::from_snapshot(&self.header.grammar)?;
        if g.hash() != self.header.grammar_hash {
            return Err(Error::Checkpoint("grammar hash does not match the stored grammar".into()));
        }
        Ok(g)
    }

    pub fn config(&self) -> Result<Config> {
        Config::from_toml_str(&self.header.config)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for p in self.policy.params() {
            w.write_all(&p.to_le_bytes())?;
        }
        if let Some(b) = &self.baseline {
            for p in b.params() {
                w.write_all(&p.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("file too short".into()))?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let len = u64::from_le_bytes(u64buf) as usize;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let header: CheckpointHeader = serde_json::from_slice(&header)?;
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf).map_err(|_| Error::Checkpoint("truncated parameters".into()))?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let n_policy = header.vocab_size * header.feature_dim + header.vocab_size;
        let policy = Policy::from_params(header.vocab_size, header.feature_dim, read_f64s(n_policy)?)?;
        let baseline = match header.baseline_hidden {
            Some(h) => Some(BaselineNet::from_params(
                header.feature_dim,
                h,
                read_f64s(BaselineNet::num_params_for(header.feature_dim, h))?,
            )?),
            None => None,
        };
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
        }
        Ok(Checkpoint {
            header,
            policy,
            baseline,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        // Write then rename so a crash never leaves a half-written file.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &buf)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }
}
