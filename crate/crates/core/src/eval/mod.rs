//! Success rates under each decoding mode, round-wise success curves and
//! the two question-quality statistics.

pub mod ablation;
pub mod study;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::game::{Game, GameSetup, RoundRecord, Transition};
use crate::guesser::{guess, init_posterior, Posterior};
use crate::questioner::{decode_question, DecodeMode, Policy, TokenId};
use crate::seed::{derive_seed, rng_for, Rng};
use crate::trainer::expert::expert_question;
use crate::world::Scene;

pub use ablation::{run_ablation, AblationReport, MeanStd, RunMetrics, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SplitMode {
    NewObject,
    NewImage,
}

impl SplitMode {
    pub const ALL: [SplitMode; 2] = [SplitMode::NewObject, SplitMode::NewImage];
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::NewObject => "NewObject",
            SplitMode::NewImage => "NewImage",
        })
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "newobject" | "new-object" => Ok(SplitMode::NewObject),
            "newimage" | "new-image" => Ok(SplitMode::NewImage),
            _ => Err(Error::config("split", format!("unknown split `{s}`, expected NewObject or NewImage"))),
        }
    }
}

/// Something that produces the next question (or `<End>`) for a game.
pub trait Agent: Sync {
    fn next_question(&self, game: &Game<'_>, rng: &mut Rng) -> Result<Vec<TokenId>>;
}

pub struct PolicyAgent<'a> {
    pub policy: &'a Policy,
    pub mode: DecodeMode,
}

impl Agent for PolicyAgent<'_> {
    fn next_question(&self, game: &Game<'_>, rng: &mut Rng) -> Result<Vec<TokenId>> {
        Ok(decode_question(self.policy, &game.feature_context(), game.state(), self.mode, rng)?.tokens)
    }
}

/// The scripted information-gain questioner.
pub struct ExpertAgent {
    pub stop_threshold: f64,
}

impl Agent for ExpertAgent {
    fn next_question(&self, game: &Game<'_>, _: &mut Rng) -> Result<Vec<TokenId>> {
        let mut asked = vec![false; game.table().num_questions()];
        for ex in &game.state().history {
            asked[ex.question] = true;
        }
        Ok(expert_question(
            game.feature_context().grammar,
            game.table(),
            &game.state().posterior,
            &asked,
            self.stop_threshold,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub scene_id: String,
    pub target: usize,
    pub guess: usize,
    pub success: bool,
    pub n_objects: usize,
    pub questions: Vec<String>,
    pub rounds: Vec<RoundRecord>,
}

impl GameRecord {
    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn target_probs(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.target_prob).collect()
    }

    /// Guesser posterior after `r` rounds, or after the last round if the
    /// game was shorter.
    pub fn posterior_at(&self, r: usize) -> Posterior {
        match r.min(self.rounds.len()) {
            0 => init_posterior(self.n_objects),
            k => Posterior {
                probs: self.rounds[k - 1].posterior.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub split: SplitMode,
    pub mode: String,
    pub n_games: usize,
    pub success: f64,
    pub records: Vec<GameRecord>,
}

pub fn play_game(setup: &GameSetup, scene: &Scene, target: usize, seed: u64, agent: &dyn Agent) -> Result<GameRecord> {
    let mut game = Game::new(setup, scene, target, seed)?;
    let mut rng = rng_for(seed, "decode", &[]);
    let mut questions = Vec::new();
    let term = loop {
        let tokens = agent.next_question(&game, &mut rng)?;
        questions.push(setup.grammar.vocab().render(&tokens));
        let mut last = Transition::Extended;
        for tok in tokens {
            last = game.step(tok)?;
        }
        if let Transition::Finished(t) = last {
            break t;
        }
    };
    Ok(GameRecord {
        scene_id: scene.id.clone(),
        target,
        guess: term.guess,
        success: term.success,
        n_objects: scene.len(),
        questions,
        rounds: game.rounds().to_vec(),
    })
}

/// The `(scene index, target)` pairs of an evaluation run.
pub fn eval_games(data: &Dataset, split: SplitMode, n_games: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let scenes = match split {
        SplitMode::NewObject => &data.train,
        SplitMode::NewImage => &data.test,
    };
    if scenes.is_empty() || (split == SplitMode::NewObject && data.held_out.iter().all(Vec::is_empty)) {
        return Err(Error::InvalidScene(format!("no scenes available for {split}")));
    }
    Ok((0..n_games)
        .map(|i| {
            let mut rng = rng_for(seed, "eval-game", &[split as u64, i as u64]);
            loop {
                let s = rng.random_range(0..scenes.len());
                let candidates: Vec<usize> = match split {
                    SplitMode::NewObject => data.held_out[s].clone(),
                    SplitMode::NewImage => (0..scenes[s].len()).collect(),
                };
                if !candidates.is_empty() {
                    break (s, candidates[rng.random_range(0..candidates.len())]);
                }
            }
        })
        .collect())
}

pub fn evaluate_agent(
    setup: &GameSetup,
    data: &Dataset,
    split: SplitMode,
    agent: &dyn Agent,
    mode_label: &str,
    n_games: usize,
    seed: u64,
) -> Result<EvalResult> {
    let scenes = match split {
        SplitMode::NewObject => &data.train,
        SplitMode::NewImage => &data.test,
    };
    let games = eval_games(data, split, n_games, seed)?;
    let records: Vec<GameRecord> = games
        .par_iter()
        .enumerate()
        .map(|(i, &(s, target))| {
            let game_seed = derive_seed(seed, "eval-play", &[split as u64, i as u64]);
            play_game(setup, &scenes[s], target, game_seed, agent)
        })
        .collect::<Result<_>>()?;
    let wins = records.iter().filter(|r| r.success).count();
    Ok(EvalResult {
        split,
        mode: mode_label.to_string(),
        n_games,
        success: wins as f64 / n_games.max(1) as f64,
        records,
    })
}

/// Plays `n_games` games with `policy` decoded under `mode`. The policy is
/// only read.
pub fn evaluate(
    setup: &GameSetup,
    policy: &Policy,
    data: &Dataset,
    split: SplitMode,
    mode: DecodeMode,
    n_games: usize,
    seed: u64,
) -> Result<EvalResult> {
    evaluate_agent(setup, data, split, &PolicyAgent { policy, mode }, &mode.to_string(), n_games, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundPoint {
    pub round: usize,
    pub successes: usize,
    pub games: usize,
    pub ratio: f64,
}

/// Success if the Guesser were forced to pick after each round `1..=j_max`.
pub fn round_success_curve(records: &[GameRecord], j_max: usize) -> Vec<RoundPoint> {
    (1..=j_max)
        .map(|r| {
            let successes = records.iter().filter(|g| guess(&g.posterior_at(r)) == g.target).count();
            RoundPoint {
                round: r,
                successes,
                games: records.len(),
                ratio: if records.is_empty() { 0.0 } else { successes as f64 / records.len() as f64 },
            }
        })
        .collect()
}

/// Whether `p_1 <= p_2 <= ... <= p_J`.
pub fn is_ascending(probs: &[f64]) -> bool {
    probs.windows(2).all(|w| w[0] <= w[1])
}

/// Percentage of successful games whose target probability never drops.
/// `None` when no game succeeded.
pub fn progressive_trend_pct(records: &[GameRecord]) -> Option<f64> {
    let wins: Vec<&GameRecord> = records.iter().filter(|r| r.success).collect();
    if wins.is_empty() {
        return None;
    }
    let up = wins.iter().filter(|r| is_ascending(&r.target_probs())).count();
    Some(100.0 * up as f64 / wins.len() as f64)
}

/// Percentage of questions in successful games whose answers are not the
/// same for every object. `None` when there are no such questions.
pub fn high_quality_pct(records: &[GameRecord]) -> Option<f64> {
    let (mut good, mut total) = (0usize, 0usize);
    for r in records.iter().filter(|r| r.success) {
        for round in &r.rounds {
            total += 1;
            good += usize::from(round.informative);
        }
    }
    (total > 0).then(|| 100.0 * good as f64 / total as f64)
}

/// Mean number of rounds over successful games.
pub fn mean_success_rounds(records: &[GameRecord]) -> Option<f64> {
    let wins: Vec<usize> = records.iter().filter(|r| r.success).map(GameRecord::num_rounds).collect();
    (!wins.is_empty()).then(|| wins.iter().sum::<usize>() as f64 / wins.len() as f64)
}
