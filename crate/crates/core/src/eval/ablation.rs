use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{Config, CODE_VERSION};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, high_quality_pct, mean_success_rounds, progressive_trend_pct, SplitMode};
use crate::questioner::Policy;
use crate::rewards::RewardConfig;
use crate::seed::derive_seed;
use crate::trainer::{game_setup, pretrain, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    SupervisedOnly,
    SoleReward,
    Goal,
    GoalProgressive,
    GoalInformative,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::SupervisedOnly,
        Variant::SoleReward,
        Variant::Goal,
        Variant::GoalProgressive,
        Variant::GoalInformative,
        Variant::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::SupervisedOnly => "supervised-only",
            Variant::SoleReward => "sole-r",
            Variant::Goal => "r_g",
            Variant::GoalProgressive => "r_g+r_p",
            Variant::GoalInformative => "r_g+r_i",
            Variant::Full => "r_g+r_p+r_i",
        }
    }

    /// Reward switches for the RL variants; `None` for supervised-only.
    pub fn rewards(self, base: &RewardConfig) -> Option<RewardConfig> {
        let with = |goal, progressive, informativeness, sole_reward| RewardConfig {
            goal,
            progressive,
            informativeness,
            sole_reward,
            ..*base
        };
        match self {
            Variant::SupervisedOnly => None,
            Variant::SoleReward => Some(with(false, false, false, true)),
            Variant::Goal => Some(with(true, false, false, false)),
            Variant::GoalProgressive => Some(with(true, true, false, false)),
            Variant::GoalInformative => Some(with(true, false, true, false)),
            Variant::Full => Some(with(true, true, true, false)),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Evaluation of one trained agent on one split under one decoding mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub variant: Variant,
    pub seed: u64,
    pub split: SplitMode,
    pub mode: String,
    pub success: f64,
    pub mean_success_rounds: Option<f64>,
    pub progressive_pct: Option<f64>,
    pub high_quality_pct: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// Sample mean and (population) standard deviation; `None` for no values.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub modes: Vec<String>,
    pub runs: Vec<RunMetrics>,
    /// Trained policies, kept in memory for cross-checks and checkpoints.
    #[serde(skip)]
    pub policies: Vec<(Variant, u64, Policy)>,
}

impl AblationReport {
    pub fn select(&self, variant: Variant, split: Option<SplitMode>, mode: Option<&str>) -> Vec<&RunMetrics> {
        self.runs
            .iter()
            .filter(|r| r.variant == variant && split.is_none_or(|s| r.split == s) && mode.is_none_or(|m| r.mode == m))
            .collect()
    }

    /// Success (as a fraction) over seeds for one cell of the table.
    pub fn success(&self, variant: Variant, split: SplitMode, mode: &str) -> Option<MeanStd> {
        let v: Vec<f64> = self.select(variant, Some(split), Some(mode)).iter().map(|r| r.success).collect();
        MeanStd::of(&v)
    }

    /// Mean of `metric` over every run of `variant` under `mode`, skipping
    /// runs where the metric is undefined.
    pub fn mean_metric(&self, variant: Variant, mode: &str, metric: impl Fn(&RunMetrics) -> Option<f64>) -> Option<MeanStd> {
        let v: Vec<f64> = self.select(variant, None, Some(mode)).into_iter().filter_map(metric).collect();
        MeanStd::of(&v)
    }

    pub fn policy(&self, variant: Variant, seed: u64) -> Option<&Policy> {
        self.policies.iter().find(|(v, s, _)| *v == variant && *s == seed).map(|(_, _, p)| p)
    }

    /// Plain-text table, success in percent as mean ± std over seeds.
    pub fn table(&self) -> String {
        let mut cols = Vec::new();
        for split in SplitMode::ALL {
            for mode in &self.modes {
                cols.push((split, mode.as_str()));
            }
        }
        let mut out = String::new();
        let _ = write!(out, "{:<16}", "variant");
        for (split, mode) in &cols {
            let _ = write!(out, " {:>18}", format!("{split}/{mode}"));
        }
        out.push('\n');
        for v in Variant::ALL {
            let _ = write!(out, "{:<16}", v.label());
            for &(split, mode) in &cols {
                let cell = match self.success(v, split, mode) {
                    Some(m) => format!("{:.1} ± {:.1}", 100.0 * m.mean, 100.0 * m.std),
                    None => "-".into(),
                };
                let _ = write!(out, " {cell:>18}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "seeds: {:?}  config: {}  {}", self.seeds, self.config_hash, self.code_version);
        out
    }
}

/// Pretrains once per seed, then trains every RL variant from the
/// pretrained policy and evaluates all of them on the same games.
pub fn run_ablation(cfg: &Config, seeds: &[u64], mut progress: impl FnMut(&str)) -> Result<AblationReport> {
    if seeds.len() < 3 {
        return Err(Error::config("ablation.seeds", "at least 3 seeds are required"));
    }
    let modes = cfg.eval.decode_modes()?;
    let mut report = AblationReport {
        config_hash: cfg.hash(),
        code_version: CODE_VERSION.to_string(),
        seeds: seeds.to_vec(),
        modes: modes.iter().map(ToString::to_string).collect(),
        runs: Vec::new(),
        policies: Vec::new(),
    };
    let setup = game_setup(cfg)?;
    for &seed in seeds {
        let data = Arc::new(Dataset::generate(&cfg.world, seed)?);
        let (supervised, _, _) = pretrain(cfg, &data, seed)?;
        progress(&format!("seed {seed}: pretrained"));
        for variant in Variant::ALL {
            let policy = match variant.rewards(&cfg.rewards) {
                None => supervised.clone(),
                Some(rewards) => {
                    let mut vcfg = cfg.clone();
                    vcfg.rewards = rewards;
                    let mut trainer = Trainer::new(&vcfg, data.clone(), Some(supervised.clone()), seed)?;
                    trainer.train(|_, _| Ok(()))?;
                    trainer.policy
                }
            };
            for split in SplitMode::ALL {
                for &mode in &modes {
                    let res = evaluate(
                        &setup,
                        &policy,
                        &data,
                        split,
                        mode,
                        cfg.eval.n_games,
                        derive_seed(seed, "eval", &[]),
                    )?;
                    report.runs.push(RunMetrics {
                        variant,
                        seed,
                        split,
                        mode: mode.to_string(),
                        success: res.success,
                        mean_success_rounds: mean_success_rounds(&res.records),
                        progressive_pct: progressive_trend_pct(&res.records),
                        high_quality_pct: high_quality_pct(&res.records),
                    });
                }
            }
            progress(&format!(
                "seed {seed}: {variant} done, NewImage greedy {:.3}",
                report
                    .runs
                    .iter()
                    .rev()
                    .find(|r| r.split == SplitMode::NewImage && r.mode == "greedy")
                    .map_or(f64::NAN, |r| r.success)
            ));
            report.policies.push((variant, seed, policy));
        }
    }
    Ok(report)
}
