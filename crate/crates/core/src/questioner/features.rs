//! Fixed-size state features.
//!
//! Layout, in order:
//!
//! | block        | size | content                                              |
//! |--------------|------|------------------------------------------------------|
//! | scalars      | 7    | entropy, max prob, top-3 probs, j/J_max, m/M_max     |
//! | last token   | V    | one-hot of the last emitted token (zeros at t = 0)   |
//! | split        | P    | posterior mass answering Yes, per question           |
//! | asked        | P    | 1 if the question was already asked this dialog      |
//! | gain         | P    | expected information gain of each question           |
//! | lookahead    | V    | best gain reachable through each legal next token    |
//!
//! `V` is the vocabulary size and `P` the number of grammar questions.
//! Everything except the last two scalars, the one-hot and the lookahead
//! block is constant within a round and lives in [`RoundSummary`].

use crate::guesser::information_gain;
use crate::oracle::{Answer, AnswerTable};
use crate::questioner::grammar::{Grammar, TokenId};
use crate::questioner::QuestionerState;

const SCALARS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub vocab: usize,
    pub questions: usize,
}

impl FeatureLayout {
    pub fn of(grammar: &Grammar) -> Self {
        FeatureLayout {
            vocab: grammar.vocab().len(),
            questions: grammar.num_predicates(),
        }
    }

    pub fn dim(&self) -> usize {
        SCALARS + 2 * self.vocab + 3 * self.questions
    }

    pub fn last_token(&self) -> usize {
        SCALARS
    }

    pub fn split(&self) -> usize {
        SCALARS + self.vocab
    }

    pub fn asked(&self) -> usize {
        self.split() + self.questions
    }

    pub fn gain(&self) -> usize {
        self.asked() + self.questions
    }

    pub fn lookahead(&self) -> usize {
        self.gain() + self.questions
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FeatureContext<'a> {
    pub grammar: &'a Grammar,
    pub table: &'a AnswerTable,
    /// Noise level assumed by the Guesser; also used for the gain block.
    pub epsilon: f64,
    pub j_max: usize,
}

/// Features that only change when a round completes.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub entropy: f64,
    pub max_prob: f64,
    pub top3: [f64; 3],
    pub round: usize,
    pub split: Vec<f64>,
    pub asked: Vec<f64>,
    pub gain: Vec<f64>,
}

impl RoundSummary {
    pub fn new(ctx: &FeatureContext<'_>, state: &QuestionerState) -> Self {
        let post = &state.posterior;
        let mut sorted = post.probs.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut top3 = [0.0; 3];
        for (slot, p) in top3.iter_mut().zip(&sorted) {
            *slot = *p;
        }
        let n_q = ctx.grammar.num_predicates();
        let split = (0..n_q)
            .map(|q| {
                post.probs
                    .iter()
                    .zip(ctx.table.row(q))
                    .filter(|(_, &a)| a == Answer::Yes)
                    .map(|(&p, _)| p)
                    .sum()
            })
            .collect();
        let mut asked = vec![0.0; n_q];
        for ex in &state.history {
            asked[ex.question] = 1.0;
        }
        let gain = (0..n_q).map(|q| information_gain(post, ctx.table, q, ctx.epsilon)).collect();
        RoundSummary {
            entropy: post.entropy(),
            max_prob: sorted.first().copied().unwrap_or(0.0),
            top3,
            round: state.round(),
            split,
            asked,
            gain,
        }
    }
}

impl FeatureContext<'_> {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::of(self.grammar)
    }

    /// Features for the state whose round-level part is `summary` and whose
    /// current question prefix is `partial`.
    pub fn encode(&self, summary: &RoundSummary, partial: &[TokenId], last_token: Option<TokenId>) -> Vec<f64> {
        let layout = self.layout();
        let mut f = vec![0.0; layout.dim()];
        f[0] = summary.entropy;
        f[1] = summary.max_prob;
        f[2..5].copy_from_slice(&summary.top3);
        f[5] = summary.round as f64 / self.j_max as f64;
        f[6] = partial.len() as f64 / self.grammar.m_max() as f64;
        if let Some(tok) = partial.last().copied().or(last_token) {
            f[layout.last_token() + tok] = 1.0;
        }
        f[layout.split()..layout.asked()].copy_from_slice(&summary.split);
        f[layout.asked()..layout.gain()].copy_from_slice(&summary.asked);
        f[layout.gain()..layout.lookahead()].copy_from_slice(&summary.gain);
        if let Some(node) = self.grammar.node(partial) {
            for (tok, child) in self.grammar.children(node) {
                let best = self
                    .grammar
                    .questions_below(child)
                    .iter()
                    .map(|&q| summary.gain[q])
                    .fold(0.0, f64::max);
                f[layout.lookahead() + tok] = best;
            }
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guesser::Posterior;
    use crate::oracle::answer_all;
    use crate::questioner::features;
    use crate::questioner::grammar::GrammarConfig;
    use crate::world::{generate_scene, WorldConfig};

    fn setup(objects: usize) -> (Grammar, crate::world::Scene) {
        let world = WorldConfig {
            min_objects: objects,
            max_objects: objects,
            new_object_holdout: 1,
            ..WorldConfig::default()
        };
        (
            Grammar::build(&GrammarConfig::default(), &world).unwrap(),
            generate_scene(&world, 21).unwrap(),
        )
    }

    #[test]
    fn uniform_entropy_is_log_n() {
        let (g, scene) = setup(4);
        let table = AnswerTable::new(&g, &scene);
        let ctx = FeatureContext {
            grammar: &g,
            table: &table,
            epsilon: 0.1,
            j_max: 5,
        };
        let state = QuestionerState::new(4);
        let f = features(&ctx, &state);
        assert!((f[0] - 4f64.ln()).abs() < 1e-12);
        assert_eq!(f.len(), ctx.layout().dim());
        assert_eq!(f, features(&ctx, &state));
    }

    #[test]
    fn split_block_matches_recomputation() {
        let (g, scene) = setup(8);
        let table = AnswerTable::new(&g, &scene);
        let ctx = FeatureContext {
            grammar: &g,
            table: &table,
            epsilon: 0.0,
            j_max: 5,
        };
        let mut state = QuestionerState::new(8);
        state.posterior = Posterior {
            probs: vec![0.3, 0.0, 0.1, 0.05, 0.2, 0.15, 0.1, 0.1],
        };
        let f = features(&ctx, &state);
        let layout = ctx.layout();
        for (qi, q) in g.questions().iter().enumerate() {
            let answers = answer_all(&g, &q.tokens, &scene).unwrap();
            let mut expected = 0.0;
            for n in 0..scene.len() {
                if answers[n] == Answer::Yes {
                    expected += state.posterior.probs[n];
                }
            }
            assert!((f[layout.split() + qi] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn lookahead_marks_only_legal_tokens() {
        let (g, scene) = setup(8);
        let table = AnswerTable::new(&g, &scene);
        let ctx = FeatureContext {
            grammar: &g,
            table: &table,
            epsilon: 0.1,
            j_max: 5,
        };
        let mut state = QuestionerState::new(8);
        state.partial = g.vocab().encode("is it").unwrap();
        let f = features(&ctx, &state);
        let layout = ctx.layout();
        let mask = g.legal_tokens(&state.partial).unwrap();
        for (tok, legal) in mask.iter().enumerate() {
            if !legal {
                assert_eq!(f[layout.lookahead() + tok], 0.0);
            }
        }
        // "in" leads to all five spatial questions; its lookahead is their best gain.
        let in_tok = g.vocab().id("in").unwrap();
        let spatial_best = g
            .questions()
            .iter()
            .enumerate()
            .filter(|(_, q)| matches!(q.predicate, crate::questioner::Predicate::Region { .. }))
            .map(|(i, _)| f[layout.gain() + i])
            .fold(0.0, f64::max);
        assert_eq!(f[layout.lookahead() + in_tok], spatial_best);
        assert_eq!(f[layout.last_token() + g.vocab().id("it").unwrap()], 1.0);
    }
}
