//! The answerer. Truth answers are exact predicate evaluations; the dialog
//! Oracle may corrupt them with probability `epsilon`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::questioner::grammar::{Grammar, Predicate, TokenId};
use crate::seed::rng_from_seed;
use crate::world::{Scene, SceneObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
    NA,
}

impl Answer {
    pub const ALL: [Answer; 3] = [Answer::Yes, Answer::No, Answer::NA];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The two answers other than `self`, in declaration order.
    pub fn others(self) -> [Answer; 2] {
        match self {
            Answer::Yes => [Answer::No, Answer::NA],
            Answer::No => [Answer::Yes, Answer::NA],
            Answer::NA => [Answer::Yes, Answer::No],
        }
    }
}

impl std::fmt::Display for Answer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::NA => "n/a",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Probability that an answer is replaced by one of the other two.
    pub epsilon: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { epsilon: 0.0 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::config("oracle.epsilon", "must be in [0, 1)"));
        }
        Ok(())
    }
}

impl Predicate {
    /// Spatial and category predicates always apply; attribute predicates
    /// are NA on objects that lack the attribute.
    pub fn answer(&self, obj: &SceneObject) -> Answer {
        let yes_no = |b: bool| if b { Answer::Yes } else { Answer::No };
        match self {
            Predicate::Category { value } => yes_no(&obj.category == value),
            Predicate::Attribute { name, value } => match obj.attributes.get(name) {
                Some(v) => yes_no(v == value),
                None => Answer::NA,
            },
            Predicate::Region { region } => yes_no(region.contains(obj.bbox.center())),
        }
    }
}

pub fn truth_answer(grammar: &Grammar, question: &[TokenId], obj: &SceneObject) -> Result<Answer> {
    let q = grammar.parse(question)?;
    Ok(grammar.predicate(q).answer(obj))
}

/// Applies the symmetric noise channel to a truth answer.
pub fn corrupt(truth: Answer, cfg: &OracleConfig, seed: u64) -> Answer {
    let mut rng = rng_from_seed(seed);
    // Both draws happen regardless of the outcome so the stream length is fixed.
    let flip = rng.random::<f64>() < cfg.epsilon;
    let pick = rng.random_range(0..2usize);
    if flip {
        truth.others()[pick]
    } else {
        truth
    }
}

pub fn answer(
    grammar: &Grammar,
    question: &[TokenId],
    target: &SceneObject,
    cfg: &OracleConfig,
    seed: u64,
) -> Result<Answer> {
    Ok(corrupt(truth_answer(grammar, question, target)?, cfg, seed))
}

/// Noiseless answers for every object, in id order.
pub fn answer_all(grammar: &Grammar, question: &[TokenId], scene: &Scene) -> Result<Vec<Answer>> {
    let q = grammar.parse(question)?;
    Ok(answer_all_predicate(grammar.predicate(q), scene))
}

pub fn answer_all_predicate(predicate: &Predicate, scene: &Scene) -> Vec<Answer> {
    scene.objects.iter().map(|o| predicate.answer(o)).collect()
}

/// Truth answers of every grammar question for every object of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerTable {
    rows: Vec<Vec<Answer>>,
}

impl AnswerTable {
    pub fn new(grammar: &Grammar, scene: &Scene) -> Self {
        AnswerTable {
            rows: grammar
                .questions()
                .iter()
                .map(|q| answer_all_predicate(&q.predicate, scene))
                .collect(),
        }
    }

    /// Answers of question `q` for each object.
    pub fn row(&self, q: usize) -> &[Answer] {
        &self.rows[q]
    }

    pub fn num_questions(&self) -> usize {
        self.rows.len()
    }

    pub fn num_objects(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}
