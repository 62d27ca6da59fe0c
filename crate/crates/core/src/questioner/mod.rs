//! The question-generating agent: grammar, state featurization, the
//! linear-softmax policy over next tokens, and decoding.

pub mod decode;
pub mod features;
pub mod grammar;
pub mod policy;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::guesser::{init_posterior, Posterior};
use crate::oracle::{Answer, AnswerTable};

pub use decode::{decode_question, DecodeMode, Decoded};
pub use features::{FeatureContext, FeatureLayout, RoundSummary};
pub use grammar::{Grammar, GrammarConfig, Predicate, TokenId, END, STOP};
pub use policy::Policy;

/// One completed question-answer round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    /// Index into [`Grammar::questions`].
    pub question: usize,
    pub tokens: Vec<TokenId>,
    pub answer: Answer,
}

/// What the questioner conditions on at time step `t`: the dialog so far,
/// the tokens of the current question, and the Guesser's posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionerState {
    pub history: Vec<Exchange>,
    pub partial: Vec<TokenId>,
    pub posterior: Posterior,
    pub last_token: Option<TokenId>,
    pub t: usize,
}

impl QuestionerState {
    pub fn new(n_objects: usize) -> Self {
        QuestionerState {
            history: Vec::new(),
            partial: Vec::new(),
            posterior: init_posterior(n_objects),
            last_token: None,
            t: 0,
        }
    }

    /// 1-based index of the round in progress.
    pub fn round(&self) -> usize {
        self.history.len() + 1
    }

    pub fn at_question_boundary(&self) -> bool {
        self.partial.is_empty()
    }
}

pub fn legal_tokens(grammar: &Grammar, state: &QuestionerState) -> Result<Vec<bool>> {
    grammar.legal_tokens(&state.partial)
}

pub fn features(ctx: &FeatureContext<'_>, state: &QuestionerState) -> Vec<f64> {
    let summary = RoundSummary::new(ctx, state);
    ctx.encode(&summary, &state.partial, state.last_token)
}

pub fn action_distribution(policy: &Policy, ctx: &FeatureContext<'_>, state: &QuestionerState) -> Result<Vec<f64>> {
    let mask = legal_tokens(ctx.grammar, state)?;
    policy.distribution(&features(ctx, state), &mask)
}

/// Gradient of `log pi(action | state)` with respect to the flattened policy parameters.
pub fn grad_log_prob(
    policy: &Policy,
    ctx: &FeatureContext<'_>,
    state: &QuestionerState,
    action: TokenId,
) -> Result<Vec<f64>> {
    let mask = legal_tokens(ctx.grammar, state)?;
    policy.grad_log_prob(&features(ctx, state), &mask, action)
}

/// Convenience bundle for callers that own the table.
pub fn feature_context<'a>(
    grammar: &'a Grammar,
    table: &'a AnswerTable,
    epsilon: f64,
    j_max: usize,
) -> FeatureContext<'a> {
    FeatureContext {
        grammar,
        table,
        epsilon,
        j_max,
    }
}
