//! Exact Bayes filter over the scene's objects.
//!
//! The observation model is the Oracle's noise channel: an object whose truth
//! answer matches the observed answer has likelihood `1 - epsilon`, any other
//! object `epsilon / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{AnswerTable, Answer};
use crate::questioner::grammar::{Grammar, TokenId};
use crate::world::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorUpdate {
    pub posterior: Posterior,
    /// The observed answer had zero probability under the prior; the
    /// posterior was reset to uniform.
    pub inconsistent: bool,
}

pub fn init_posterior(n: usize) -> Posterior {
    Posterior {
        probs: vec![1.0 / n as f64; n],
    }
}

pub fn likelihood(truth: Answer, observed: Answer, epsilon: f64) -> f64 {
    if truth == observed {
        1.0 - epsilon
    } else {
        epsilon / 2.0
    }
}

/// One filtering step given the truth answers of the asked question.
pub fn update_with_answers(post: &Posterior, truths: &[Answer], observed: Answer, epsilon: f64) -> PosteriorUpdate {
    debug_assert_eq!(post.probs.len(), truths.len());
    let mut probs: Vec<f64> = post
        .probs
        .iter()
        .zip(truths)
        .map(|(&p, &t)| p * likelihood(t, observed, epsilon))
        .collect();
    let z: f64 = probs.iter().sum();
    if z <= 0.0 {
        return PosteriorUpdate {
            posterior: init_posterior(probs.len()),
            inconsistent: true,
        };
    }
    for p in &mut probs {
        *p /= z;
    }
    PosteriorUpdate {
        posterior: Posterior { probs },
        inconsistent: false,
    }
}

pub fn update_posterior(
    post: &Posterior,
    grammar: &Grammar,
    question: &[TokenId],
    observed: Answer,
    scene: &Scene,
    epsilon: f64,
) -> Result<PosteriorUpdate> {
    let q = grammar.parse(question)?;
    let truths = crate::oracle::answer_all_predicate(grammar.predicate(q), scene);
    Ok(update_with_answers(post, &truths, observed, epsilon))
}

/// Argmax with ties broken towards the lowest id.
pub fn guess(post: &Posterior) -> usize {
    let mut best = 0;
    for (i, &p) in post.probs.iter().enumerate() {
        if p > post.probs[best] {
            best = i;
        }
    }
    best
}

pub fn target_probability(post: &Posterior, target_id: usize) -> Result<f64> {
    post.probs.get(target_id).copied().ok_or(Error::ObjectOutOfRange {
        id: target_id,
        len: post.probs.len(),
    })
}

impl Posterior {
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    pub fn max(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// Expected entropy of the posterior after asking question `q`, under the
/// observation model with noise `epsilon`.
pub fn expected_posterior_entropy(post: &Posterior, table: &AnswerTable, q: usize, epsilon: f64) -> f64 {
    let truths = table.row(q);
    let mut total = 0.0;
    for observed in Answer::ALL {
        let joint = || post.probs.iter().zip(truths).map(|(&p, &t)| p * likelihood(t, observed, epsilon));
        let z: f64 = joint().sum();
        if z <= 0.0 {
            continue;
        }
        let h: f64 = joint()
            .filter(|&w| w > 0.0)
            .map(|w| {
                let p = w / z;
                -p * p.ln()
            })
            .sum();
        total += z * h;
    }
    total
}

pub fn information_gain(post: &Posterior, table: &AnswerTable, q: usize, epsilon: f64) -> f64 {
    post.entropy() - expected_posterior_entropy(post, table, q, epsilon)
}
