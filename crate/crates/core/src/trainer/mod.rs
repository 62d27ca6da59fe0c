//! REINFORCE training of the questioner with a learned baseline, plus
//! supervised pretraining on scripted expert dialogs.

pub mod baseline;
pub mod expert;
pub mod gradient;
pub mod pretrain;
pub mod rollout;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baseline::{baseline_update, Baseline, BaselineNet, ConstantBaseline};
pub use expert::{expert_episode, expert_question, generate_expert_episodes};
pub use gradient::{policy_gradient, GradientOptions};
pub use pretrain::{nll, nll_gradient, pretrain_supervised};
pub use rollout::{replay_episode, rollout_episode, run_episode, verify_episode, EpisodeLog, StepRecord, Trajectory};

use crate::checkpoint::Checkpoint;
use crate::config::{Config, CODE_VERSION};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::game::GameSetup;
use crate::questioner::{FeatureLayout, Grammar, Policy};
use crate::seed::{derive_seed, rng_for};
use crate::world::TargetLog;

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: String,
    pub mode: String,
    pub success: f64,
    pub mean_rounds: f64,
    pub mean_reward: f64,
    pub nll: Option<f64>,
    pub baseline_loss: Option<f64>,
    pub config_hash: String,
    pub code_version: String,
}

pub fn game_setup(cfg: &Config) -> Result<GameSetup> {
    Ok(GameSetup {
        grammar: Arc::new(Grammar::build(&cfg.grammar, &cfg.world)?),
        oracle: cfg.oracle,
        rewards: cfg.rewards,
    })
}

pub fn zero_policy(grammar: &Grammar) -> Policy {
    let layout = FeatureLayout::of(grammar);
    Policy::zeros(layout.vocab, layout.dim())
}

/// Supervised pretraining from the zero policy. Returns the policy, the NLL
/// after each epoch and the targets the expert dialogs used.
pub fn pretrain(cfg: &Config, data: &Dataset, seed: u64) -> Result<(Policy, Vec<f64>, TargetLog)> {
    let setup = game_setup(cfg)?;
    let p = &cfg.pretrain;
    let (episodes, targets) = generate_expert_episodes(
        &setup,
        &data.train,
        &data.trainable,
        p.expert_episodes,
        p.stop_threshold,
        derive_seed(seed, "expert", &[]),
    )?;
    let (policy, hist) = pretrain_supervised(&episodes, zero_policy(&setup.grammar), p, derive_seed(seed, "pretrain", &[]))?;
    Ok((policy, hist, targets))
}

pub struct EpochReport {
    pub metrics: MetricRecord,
    /// A few sampled episodes per update, for the episode log.
    pub episodes: Vec<EpisodeLog>,
}

pub struct Trainer {
    cfg: Config,
    setup: GameSetup,
    data: Arc<Dataset>,
    seed: u64,
    pub policy: Policy,
    pub baseline: BaselineNet,
    /// Completed epochs.
    pub epoch: usize,
    pub targets: TargetLog,
}

impl Trainer {
    /// Starts a run from `init` (e.g. a pretrained policy) or from zeros.
    pub fn new(cfg: &Config, data: Arc<Dataset>, init: Option<Policy>, seed: u64) -> Result<Self> {
        let setup = game_setup(cfg)?;
        let policy = init.unwrap_or_else(|| zero_policy(&setup.grammar));
        let layout = FeatureLayout::of(&setup.grammar);
        if policy.vocab_size() != layout.vocab || policy.feature_dim() != layout.dim() {
            return Err(Error::Checkpoint("initial policy does not match the grammar".into()));
        }
        let baseline = BaselineNet::new(layout.dim(), cfg.trainer.baseline_hidden, derive_seed(seed, "baseline", &[]));
        Ok(Trainer {
            cfg: cfg.clone(),
            setup,
            data,
            seed,
            policy,
            baseline,
            epoch: 0,
            targets: TargetLog::default(),
        })
    }

    /// Continues a run from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(cfg: &Config, data: Arc<Dataset>, ck: &Checkpoint) -> Result<Self> {
        let mut t = Trainer::new(cfg, data, Some(ck.policy.clone()), ck.header.master_seed)?;
        if ck.header.grammar_hash != t.setup.grammar.hash() {
            return Err(Error::Checkpoint("checkpoint grammar differs from the configured one".into()));
        }
        if let Some(b) = &ck.baseline {
            t.baseline = b.clone();
        }
        t.epoch = ck.header.epoch;
        for e in 0..t.epoch {
            for (s, target) in t.assignments(e) {
                t.targets.record(&t.data.train[s].id, target);
            }
        }
        Ok(t)
    }

    pub fn checkpoint(&self, label: &str) -> Checkpoint {
        Checkpoint::new(
            &self.cfg,
            &self.setup.grammar,
            self.policy.clone(),
            Some(self.baseline.clone()),
            self.epoch,
            self.seed,
            label,
        )
    }

    pub fn setup(&self) -> &GameSetup {
        &self.setup
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.trainer.epochs
    }

    /// Each training scene once per epoch, in shuffled order, with a target
    /// drawn from its trainable objects.
    fn assignments(&self, epoch: usize) -> Vec<(usize, usize)> {
        let e = epoch as u64;
        let mut order: Vec<usize> = (0..self.data.train.len()).collect();
        order.shuffle(&mut rng_for(self.seed, "epoch-order", &[e]));
        order
            .into_iter()
            .map(|s| {
                let objs = &self.data.trainable[s];
                let mut rng = rng_for(self.seed, "train-target", &[e, s as u64]);
                (s, objs[rng.random_range(0..objs.len())])
            })
            .collect()
    }

    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        let epoch = self.epoch;
        let tc = self.cfg.trainer.clone();
        let opts = GradientOptions {
            entropy_bonus: tc.entropy_bonus,
            normalize_advantages: tc.normalize_advantages,
        };
        let plan = self.assignments(epoch);
        let (mut wins, mut rounds, mut reward, mut n) = (0usize, 0usize, 0.0, 0usize);
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        let mut logged = Vec::new();
        for (update, chunk) in plan.chunks(tc.batch_size).enumerate() {
            let batch: Vec<Trajectory> = chunk
                .par_iter()
                .enumerate()
                .map(|(k, &(s, target))| {
                    let idx = (update * tc.batch_size + k) as u64;
                    let seed = derive_seed(self.seed, "rollout", &[epoch as u64, idx]);
                    rollout_episode(&self.setup, &self.data.train[s], target, &self.policy, seed)
                })
                .collect::<Result<_>>()?;
            let grad = policy_gradient(&batch, &self.policy, &self.baseline, &opts)?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { epoch, update });
            }
            self.policy.apply(&grad, tc.lr);
            loss_sum += baseline_update(&batch, &mut self.baseline, tc.baseline_lr)?;
            updates += 1;
            for (t, &(s, target)) in batch.iter().zip(chunk) {
                self.targets.record(&self.data.train[s].id, target);
                wins += usize::from(t.success());
                rounds += t.termination.rounds;
                reward += t.total_reward();
                n += 1;
            }
            for (t, &(s, _)) in batch.iter().zip(chunk).take(tc.log_episodes_per_update) {
                logged.push(t.to_log(&self.data.train[s]));
            }
        }
        self.epoch += 1;
        let nf = n.max(1) as f64;
        Ok(EpochReport {
            metrics: MetricRecord {
                epoch,
                split: "train".into(),
                mode: "sampling".into(),
                success: wins as f64 / nf,
                mean_rounds: rounds as f64 / nf,
                mean_reward: reward / nf,
                nll: None,
                baseline_loss: Some(loss_sum / updates.max(1) as f64),
                config_hash: self.cfg.hash(),
                code_version: CODE_VERSION.to_string(),
            },
            episodes: logged,
        })
    }

    /// Runs the remaining epochs, handing each report to `on_epoch`.
    pub fn train(&mut self, mut on_epoch: impl FnMut(&Trainer, &EpochReport) -> Result<()>) -> Result<Vec<MetricRecord>> {
        let mut out = Vec::new();
        while !self.is_done() {
            let report = self.run_epoch()?;
            on_epoch(self, &report)?;
            out.push(report.metrics);
        }
        Ok(out)
    }
}
