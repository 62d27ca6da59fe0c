//! Question decoding: sampling, greedy and beam search over the masked
//! token distribution. Every mode returns either a complete question ending
//! in `?` or the single token `<End>`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::questioner::features::{FeatureContext, RoundSummary};
use crate::questioner::grammar::{TokenId, END, STOP};
use crate::questioner::policy::Policy;
use crate::questioner::QuestionerState;
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Sampling,
    Greedy,
    Beam(usize),
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeMode::Sampling => f.write_str("sampling"),
            DecodeMode::Greedy => f.write_str("greedy"),
            DecodeMode::Beam(w) => write!(f, "beam{w}"),
        }
    }
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampling" => Ok(DecodeMode::Sampling),
            "greedy" => Ok(DecodeMode::Greedy),
            "beam" => Ok(DecodeMode::Beam(5)),
            _ => s
                .strip_prefix("beam")
                .and_then(|w| w.parse().ok())
                .filter(|&w: &usize| w >= 1)
                .map(DecodeMode::Beam)
                .ok_or_else(|| Error::config("eval.modes", format!("unknown decode mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub tokens: Vec<TokenId>,
    /// Total log-probability of `tokens` under the policy.
    pub log_prob: f64,
}

impl Decoded {
    pub fn is_end(&self) -> bool {
        self.tokens == [END]
    }
}

/// Samples one token from `probs`; `probs` must sum to one.
pub fn sample_token(probs: &[f64], rng: &mut Rng) -> TokenId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (tok, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = tok;
        if u < acc {
            return tok;
        }
    }
    last
}

/// Highest-probability token; ties go to the lowest index.
pub fn argmax_token(probs: &[f64]) -> TokenId {
    let mut best = 0;
    for (tok, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = tok;
        }
    }
    best
}

fn step_distribution(
    policy: &Policy,
    ctx: &FeatureContext<'_>,
    summary: &RoundSummary,
    state: &QuestionerState,
    partial: &[TokenId],
) -> Result<Vec<f64>> {
    let mask = ctx.grammar.legal_tokens(partial)?;
    policy.distribution(&ctx.encode(summary, partial, state.last_token), &mask)
}

/// Decodes one question from a state at a question boundary.
///
/// `rng` is only consumed in sampling mode.
pub fn decode_question(
    policy: &Policy,
    ctx: &FeatureContext<'_>,
    state: &QuestionerState,
    mode: DecodeMode,
    rng: &mut Rng,
) -> Result<Decoded> {
    debug_assert!(state.at_question_boundary());
    let summary = RoundSummary::new(ctx, state);
    match mode {
        DecodeMode::Sampling | DecodeMode::Greedy => {
            let mut tokens = Vec::new();
            let mut log_prob = 0.0;
            loop {
                let probs = step_distribution(policy, ctx, &summary, state, &tokens)?;
                let tok = match mode {
                    DecodeMode::Sampling => sample_token(&probs, rng),
                    _ => argmax_token(&probs),
                };
                log_prob += probs[tok].ln();
                tokens.push(tok);
                if tok == STOP || tok == END {
                    return Ok(Decoded { tokens, log_prob });
                }
            }
        }
        DecodeMode::Beam(width) => beam_search(policy, ctx, &summary, state, width.max(1)),
    }
}

/// Higher log-probability first, then lexicographic token order.
fn rank(a: &Decoded, b: &Decoded) -> Ordering {
    b.log_prob.total_cmp(&a.log_prob).then_with(|| a.tokens.cmp(&b.tokens))
}

fn beam_search(
    policy: &Policy,
    ctx: &FeatureContext<'_>,
    summary: &RoundSummary,
    state: &QuestionerState,
    width: usize,
) -> Result<Decoded> {
    let mut beam = vec![Decoded {
        tokens: Vec::new(),
        log_prob: 0.0,
    }];
    let mut finished: Vec<Decoded> = Vec::new();
    while !beam.is_empty() {
        let mut candidates = Vec::new();
        for hyp in &beam {
            let probs = step_distribution(policy, ctx, summary, state, &hyp.tokens)?;
            for (tok, &p) in probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let mut tokens = hyp.tokens.clone();
                tokens.push(tok);
                candidates.push(Decoded {
                    tokens,
                    log_prob: hyp.log_prob + p.ln(),
                });
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(width);
        beam.clear();
        for c in candidates {
            if matches!(c.tokens.last(), Some(&STOP) | Some(&END)) {
                finished.push(c);
            } else {
                beam.push(c);
            }
        }
        // Scores only decrease with length, so no active hypothesis can beat
        // a finished one that already ranks above all of them.
        finished.sort_by(rank);
        if let (Some(best), Some(top)) = (finished.first(), beam.first()) {
            if best.log_prob >= top.log_prob {
                break;
            }
        }
    }
    finished.into_iter().next().ok_or(Error::EmptyMask)
}
