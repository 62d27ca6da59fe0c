//! Scripted information-gain questioner. It supplies the dialogs for
//! supervised pretraining and an upper reference in evaluation.

use std::collections::VecDeque;

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::Result;
use crate::game::GameSetup;
use crate::guesser::{expected_posterior_entropy, Posterior};
use crate::oracle::AnswerTable;
use crate::questioner::{Grammar, TokenId, END};
use crate::seed::{derive_seed, rng_for};
use crate::trainer::rollout::{run_episode, Trajectory};
use crate::world::{Scene, TargetLog};

/// Gains at or below this are treated as zero.
const MIN_GAIN: f64 = 1e-12;

/// The unasked question with the lowest expected posterior entropy under a
/// noiseless Oracle, or `None` when nothing is left worth asking.
pub fn best_question(table: &AnswerTable, posterior: &Posterior, asked: &[bool]) -> Option<usize> {
    let h0 = posterior.entropy();
    let mut best: Option<(usize, f64)> = None;
    for q in 0..table.num_questions() {
        if asked[q] {
            continue;
        }
        let h = expected_posterior_entropy(posterior, table, q, 0.0);
        // Strict comparison keeps the lowest index among ties.
        if best.is_none_or(|(_, bh)| h < bh - MIN_GAIN) {
            best = Some((q, h));
        }
    }
    best.filter(|&(_, h)| h0 - h > MIN_GAIN).map(|(q, _)| q)
}

/// Tokens of the expert's next question, or `[<End>]`.
pub fn expert_question(
    grammar: &Grammar,
    table: &AnswerTable,
    posterior: &Posterior,
    asked: &[bool],
    stop_threshold: f64,
) -> Vec<TokenId> {
    if posterior.max() > stop_threshold {
        return vec![END];
    }
    match best_question(table, posterior, asked) {
        Some(q) => grammar.questions()[q].tokens.clone(),
        None => vec![END],
    }
}

pub fn expert_episode(
    setup: &GameSetup,
    scene: &Scene,
    target: usize,
    seed: u64,
    stop_threshold: f64,
) -> Result<Trajectory> {
    let mut plan: VecDeque<TokenId> = VecDeque::new();
    run_episode(setup, scene, target, seed, |game, _, _| {
        if plan.is_empty() {
            let mut asked = vec![false; setup.grammar.questions().len()];
            for ex in &game.state().history {
                asked[ex.question] = true;
            }
            plan.extend(expert_question(
                &setup.grammar,
                game.table(),
                &game.state().posterior,
                &asked,
                stop_threshold,
            ));
        }
        Ok(plan.pop_front().expect("plan is never empty"))
    })
}

/// Expert dialogs on training scenes, with targets drawn from each scene's
/// trainable objects. Also returns the targets used.
pub fn generate_expert_episodes(
    setup: &GameSetup,
    scenes: &[Scene],
    trainable: &[Vec<usize>],
    n: usize,
    stop_threshold: f64,
    seed: u64,
) -> Result<(Vec<Trajectory>, TargetLog)> {
    let picks: Vec<(usize, usize)> = (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, "expert-game", &[i as u64]);
            let s = rng.random_range(0..scenes.len());
            let t = trainable[s][rng.random_range(0..trainable[s].len())];
            (s, t)
        })
        .collect();
    let episodes = picks
        .par_iter()
        .enumerate()
        .map(|(i, &(s, t))| {
            expert_episode(setup, &scenes[s], t, derive_seed(seed, "expert-episode", &[i as u64]), stop_threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut log = TargetLog::default();
    for &(s, t) in &picks {
        log.record(&scenes[s].id, t);
    }
    Ok((episodes, log))
}
