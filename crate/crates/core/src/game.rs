//! One guessing game, advanced token by token.
//!
//! Each action falls into one of three cases: `?` closes the current
//! question and the Oracle answers it, `<End>` closes the dialog and the
//! Guesser picks an object, and any other token extends the current
//! question. The dialog is also closed once `J_max` rounds are complete.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guesser::{guess, update_with_answers};
use crate::oracle::{corrupt, Answer, AnswerTable, OracleConfig};
use crate::questioner::{
    decode_question, DecodeMode, Decoded, Exchange, FeatureContext, Grammar, Policy, QuestionerState, RoundSummary,
    TokenId, END, STOP,
};
use crate::rewards::{
    assemble_step_rewards, informativeness_reward, progressive_reward, returns, RewardConfig, RoundRewards,
    TerminalOutcome,
};
use crate::seed::{derive_seed, Rng};
use crate::world::Scene;

/// Everything a game needs besides the scene and the target.
#[derive(Debug, Clone)]
pub struct GameSetup {
    pub grammar: Arc<Grammar>,
    pub oracle: OracleConfig,
    pub rewards: RewardConfig,
}

impl GameSetup {
    /// The Guesser shares the Oracle's noise level.
    pub fn guesser_epsilon(&self) -> f64 {
        self.oracle.epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub tokens: Vec<TokenId>,
    pub question: usize,
    /// What the Oracle said about the target (possibly corrupted).
    pub answer: Answer,
    /// Noiseless answers for every object.
    pub answers_all: Vec<Answer>,
    pub informative: bool,
    /// Guesser posterior after this round.
    pub posterior: Vec<f64>,
    pub target_prob: f64,
    pub question_step: usize,
    #[serde(default)]
    pub inconsistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    EndToken,
    RoundLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Termination {
    pub reason: EndReason,
    pub guess: usize,
    pub success: bool,
    pub rounds: usize,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// Token appended to the current question.
    Extended,
    /// Question closed and answered; the dialog goes on.
    Answered(Answer),
    Finished(Termination),
}

pub struct Game<'a> {
    setup: &'a GameSetup,
    scene: &'a Scene,
    target: usize,
    seed: u64,
    table: AnswerTable,
    state: QuestionerState,
    summary: RoundSummary,
    rounds: Vec<RoundRecord>,
    actions: Vec<TokenId>,
    termination: Option<Termination>,
}

/// Rewards and returns of a finished game, one entry per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub rewards: Vec<f64>,
    pub returns: Vec<f64>,
}

impl<'a> Game<'a> {
    pub fn new(setup: &'a GameSetup, scene: &'a Scene, target: usize, seed: u64) -> Result<Self> {
        if target >= scene.len() {
            return Err(Error::ObjectOutOfRange {
                id: target,
                len: scene.len(),
            });
        }
        let table = AnswerTable::new(&setup.grammar, scene);
        let state = QuestionerState::new(scene.len());
        let summary = RoundSummary::new(
            &FeatureContext {
                grammar: &setup.grammar,
                table: &table,
                epsilon: setup.guesser_epsilon(),
                j_max: setup.rewards.j_max,
            },
            &state,
        );
        Ok(Game {
            setup,
            scene,
            target,
            seed,
            table,
            state,
            summary,
            rounds: Vec::new(),
            actions: Vec::new(),
            termination: None,
        })
    }

    pub fn feature_context(&self) -> FeatureContext<'_> {
        FeatureContext {
            grammar: &self.setup.grammar,
            table: &self.table,
            epsilon: self.setup.guesser_epsilon(),
            j_max: self.setup.rewards.j_max,
        }
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> &QuestionerState {
        &self.state
    }

    pub fn table(&self) -> &AnswerTable {
        &self.table
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn actions(&self) -> &[TokenId] {
        &self.actions
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn is_finished(&self) -> bool {
        self.termination.is_some()
    }

    pub fn features(&self) -> Vec<f64> {
        self.feature_context().encode(&self.summary, &self.state.partial, self.state.last_token)
    }

    pub fn legal_mask(&self) -> Result<Vec<bool>> {
        self.setup.grammar.legal_tokens(&self.state.partial)
    }

    fn terminate(&mut self, reason: EndReason) -> Termination {
        let g = guess(&self.state.posterior);
        let term = Termination {
            reason,
            guess: g,
            success: g == self.target,
            rounds: self.rounds.len(),
            step: self.actions.len() - 1,
        };
        self.termination = Some(term);
        term
    }

    pub fn step(&mut self, token: TokenId) -> Result<Transition> {
        if self.is_finished() {
            return Err(Error::GameFinished);
        }
        let mask = self.legal_mask()?;
        if !mask.get(token).copied().unwrap_or(false) {
            let vocab = self.setup.grammar.vocab();
            return Err(Error::IllegalAction {
                token: if token < vocab.len() { vocab.token(token).to_string() } else { format!("#{token}") },
            });
        }
        let step = self.actions.len();
        self.actions.push(token);
        self.state.t += 1;
        self.state.last_token = Some(token);
        match token {
            END => Ok(Transition::Finished(self.terminate(EndReason::EndToken))),
            STOP => {
                let mut tokens = std::mem::take(&mut self.state.partial);
                tokens.push(STOP);
                let question = self.setup.grammar.parse(&tokens)?;
                let round = self.rounds.len() as u64;
                let answers_all = self.table.row(question).to_vec();
                let answer = corrupt(
                    answers_all[self.target],
                    &self.setup.oracle,
                    derive_seed(self.seed, "oracle", &[round]),
                );
                let update = update_with_answers(&self.state.posterior, &answers_all, answer, self.setup.guesser_epsilon());
                self.state.posterior = update.posterior;
                self.state.history.push(Exchange {
                    question,
                    tokens: tokens.clone(),
                    answer,
                });
                let informative = answers_all.iter().any(|a| *a != answers_all[0]);
                self.rounds.push(RoundRecord {
                    tokens,
                    question,
                    answer,
                    answers_all,
                    informative,
                    posterior: self.state.posterior.probs.clone(),
                    target_prob: self.state.posterior.probs[self.target],
                    question_step: step,
                    inconsistent: update.inconsistent,
                });
                self.summary = RoundSummary::new(&self.feature_context(), &self.state);
                if self.rounds.len() >= self.setup.rewards.j_max {
                    Ok(Transition::Finished(self.terminate(EndReason::RoundLimit)))
                } else {
                    Ok(Transition::Answered(answer))
                }
            }
            _ => {
                self.state.partial.push(token);
                Ok(Transition::Extended)
            }
        }
    }

    /// Decodes one full question with `policy` and plays it.
    pub fn play_question(&mut self, policy: &Policy, mode: DecodeMode, rng: &mut Rng) -> Result<(Decoded, Transition)> {
        if self.is_finished() {
            return Err(Error::GameFinished);
        }
        let decoded = decode_question(policy, &self.feature_context(), &self.state, mode, rng)?;
        let mut last = Transition::Extended;
        for &tok in &decoded.tokens {
            last = self.step(tok)?;
        }
        Ok((decoded, last))
    }

    /// Step rewards and returns under `cfg`. The game must be finished.
    pub fn score(&self, cfg: &RewardConfig) -> Result<Scored> {
        let term = self.termination.ok_or_else(|| Error::RewardAssembly("game not finished".into()))?;
        let mut round_rewards = Vec::with_capacity(self.rounds.len());
        for (j, r) in self.rounds.iter().enumerate() {
            // No progressive reward for the first round.
            let progressive = if j > 0 {
                progressive_reward(r.target_prob, self.rounds[j - 1].target_prob)
            } else {
                0.0
            };
            round_rewards.push(RoundRewards {
                question_step: r.question_step,
                progressive,
                informativeness: informativeness_reward(&r.answers_all, cfg)?,
            });
        }
        let terminal = TerminalOutcome {
            step: term.step,
            success: term.success,
            rounds: term.rounds,
        };
        let rewards: Vec<f64> = assemble_step_rewards(self.actions.len(), &round_rewards, &terminal, cfg)?
            .into_iter()
            .map(|s| s.value)
            .collect();
        let returns = returns(&rewards);
        Ok(Scored { rewards, returns })
    }
}
