use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::PretrainConfig;
use crate::error::{Error, Result};
use crate::questioner::Policy;
use crate::seed::rng_for;
use crate::trainer::rollout::Trajectory;

/// Mean over episodes of `-sum_t log pi(A_t | S_t)`.
pub fn nll(policy: &Policy, episodes: &[Trajectory]) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let per: Vec<f64> = episodes
        .par_iter()
        .map(|e| {
            e.steps
                .iter()
                .map(|s| policy.log_prob(&s.features, &s.mask, s.action).map(|lp| -lp))
                .sum::<Result<f64>>()
        })
        .collect::<Result<_>>()?;
    Ok(per.iter().sum::<f64>() / episodes.len() as f64)
}

/// Gradient of [`nll`] with respect to the policy parameters.
pub fn nll_gradient(policy: &Policy, episodes: &[Trajectory]) -> Result<Vec<f64>> {
    if episodes.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let parts: Vec<Vec<f64>> = episodes
        .par_iter()
        .map(|e| {
            let mut g = vec![0.0; policy.num_params()];
            for s in &e.steps {
                policy.accumulate_grad_log_prob(&s.features, &s.mask, s.action, -1.0, &mut g)?;
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; policy.num_params()];
    for part in &parts {
        for (a, g) in total.iter_mut().zip(part) {
            *a += g;
        }
    }
    let inv = 1.0 / episodes.len() as f64;
    total.iter_mut().for_each(|g| *g *= inv);
    Ok(total)
}

/// Minibatch SGD on the expert dialogs. Returns the policy and the NLL over
/// all episodes after each epoch.
pub fn pretrain_supervised(
    episodes: &[Trajectory],
    mut policy: Policy,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<(Policy, Vec<f64>)> {
    if episodes.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng_for(seed, "pretrain-order", &[epoch as u64]));
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Trajectory> = chunk.iter().map(|&i| episodes[i].clone()).collect();
            let g = nll_gradient(&policy, &batch)?;
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient { epoch, update: 0 });
            }
            policy.apply(&g, -cfg.lr);
        }
        history.push(nll(&policy, episodes)?);
    }
    Ok((policy, history))
}
