use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, GameSetup, RoundRecord, Termination};
use crate::questioner::decode::sample_token;
use crate::questioner::{Policy, TokenId};
use crate::seed::{rng_for, Rng};
use crate::world::Scene;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub features: Vec<f64>,
    pub action: TokenId,
    pub mask: Vec<bool>,
    pub reward: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scene_id: String,
    pub target: usize,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub rounds: Vec<RoundRecord>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn actions(&self) -> Vec<TokenId> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.ret)
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.ret).collect()
    }

    pub fn success(&self) -> bool {
        self.termination.success
    }

    pub fn to_log(&self, scene: &Scene) -> EpisodeLog {
        EpisodeLog {
            scene: scene.clone(),
            target: self.target,
            seed: self.seed,
            actions: self.actions(),
            rewards: self.rewards(),
            returns: self.returns(),
            success: self.termination.success,
            rounds: self.termination.rounds,
        }
    }
}

/// Self-contained record of one episode, enough to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scene: Scene,
    pub target: usize,
    pub seed: u64,
    pub actions: Vec<TokenId>,
    pub rewards: Vec<f64>,
    pub returns: Vec<f64>,
    pub success: bool,
    pub rounds: usize,
}

/// Plays one game to the end, asking `choose` for every action.
pub fn run_episode(
    setup: &GameSetup,
    scene: &Scene,
    target: usize,
    seed: u64,
    mut choose: impl FnMut(&Game<'_>, &[f64], &[bool]) -> Result<TokenId>,
) -> Result<Trajectory> {
    let mut game = Game::new(setup, scene, target, seed)?;
    let bound = setup.grammar.m_max() * setup.rewards.j_max;
    let mut pending = Vec::new();
    while !game.is_finished() {
        if pending.len() >= bound {
            return Err(Error::RewardAssembly(format!("episode exceeded {bound} steps")));
        }
        let features = game.features();
        let mask = game.legal_mask()?;
        let action = choose(&game, &features, &mask)?;
        game.step(action)?;
        pending.push((features, action, mask));
    }
    let scored = game.score(&setup.rewards)?;
    let steps = pending
        .into_iter()
        .zip(scored.rewards.iter().zip(&scored.returns))
        .map(|((features, action, mask), (&reward, &ret))| StepRecord {
            features,
            action,
            mask,
            reward,
            ret,
        })
        .collect();
    Ok(Trajectory {
        scene_id: scene.id.clone(),
        target,
        seed,
        steps,
        rounds: game.rounds().to_vec(),
        termination: game.termination().expect("finished game has a termination"),
    })
}

/// Samples an episode from `policy`. The policy stream is derived from
/// `seed`, separately from the Oracle's.
pub fn rollout_episode(
    setup: &GameSetup,
    scene: &Scene,
    target: usize,
    policy: &Policy,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng: Rng = rng_for(seed, "policy", &[]);
    run_episode(setup, scene, target, seed, |_, f, mask| {
        Ok(sample_token(&policy.distribution(f, mask)?, &mut rng))
    })
}

/// Re-executes recorded actions in a fresh game with the same seed.
pub fn replay_episode(
    setup: &GameSetup,
    scene: &Scene,
    target: usize,
    seed: u64,
    actions: &[TokenId],
) -> Result<Trajectory> {
    let mut next = actions.iter();
    let traj = run_episode(setup, scene, target, seed, |_, _, _| {
        next.next()
            .copied()
            .ok_or_else(|| Error::Format("episode log ends before the game does".into()))
    })?;
    if traj.steps.len() != actions.len() {
        return Err(Error::Format(format!(
            "game finished after {} of {} logged actions",
            traj.steps.len(),
            actions.len()
        )));
    }
    Ok(traj)
}

/// Replays `log` and checks that every reward and return matches bit for bit.
pub fn verify_episode(setup: &GameSetup, log: &EpisodeLog) -> Result<Trajectory> {
    let traj = replay_episode(setup, &log.scene, log.target, log.seed, &log.actions)?;
    let same = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
    if !same(&traj.rewards(), &log.rewards) {
        return Err(Error::Format("replayed rewards differ from the log".into()));
    }
    if !same(&traj.returns(), &log.returns) {
        return Err(Error::Format("replayed returns differ from the log".into()));
    }
    if traj.success() != log.success || traj.termination.rounds != log.rounds {
        return Err(Error::Format("replayed outcome differs from the log".into()));
    }
    Ok(traj)
}
