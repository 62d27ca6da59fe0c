use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::questioner::Policy;
use crate::trainer::baseline::Baseline;
use crate::trainer::rollout::Trajectory;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientOptions {
    pub entropy_bonus: f64,
    pub normalize_advantages: bool,
}

/// Per-step advantages `Q_t - b(S_t)`, optionally standardized over the batch.
pub fn advantages(batch: &[Trajectory], baseline: &dyn Baseline, normalize: bool) -> Vec<Vec<f64>> {
    let mut adv: Vec<Vec<f64>> = batch
        .par_iter()
        .map(|t| t.steps.iter().map(|s| s.ret - baseline.value(&s.features)).collect())
        .collect();
    if normalize {
        let n: usize = adv.iter().map(Vec::len).sum();
        if n > 1 {
            let mean = adv.iter().flatten().sum::<f64>() / n as f64;
            let var = adv.iter().flatten().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt().max(1e-8);
            for a in adv.iter_mut().flatten() {
                *a = (*a - mean) / sd;
            }
        }
    }
    adv
}

fn trajectory_gradient(policy: &Policy, traj: &Trajectory, adv: &[f64], opts: &GradientOptions) -> Result<Vec<f64>> {
    let mut g = vec![0.0; policy.num_params()];
    for (step, &a) in traj.steps.iter().zip(adv) {
        policy.accumulate_grad_log_prob(&step.features, &step.mask, step.action, a, &mut g)?;
        if opts.entropy_bonus != 0.0 {
            policy.accumulate_grad_entropy(&step.features, &step.mask, opts.entropy_bonus, &mut g)?;
        }
    }
    Ok(g)
}

/// REINFORCE estimate of the gradient of expected return: the batch mean of
/// `sum_t grad log pi(A_t | S_t) * (Q_t - b(S_t))`.
///
/// Per-trajectory gradients may be computed in parallel, but they are summed
/// in batch order so the result does not depend on scheduling.
pub fn policy_gradient(
    batch: &[Trajectory],
    policy: &Policy,
    baseline: &dyn Baseline,
    opts: &GradientOptions,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let adv = advantages(batch, baseline, opts.normalize_advantages);
    let parts: Vec<Vec<f64>> = batch
        .par_iter()
        .zip(adv.par_iter())
        .map(|(t, a)| trajectory_gradient(policy, t, a, opts))
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; policy.num_params()];
    for part in &parts {
        for (acc, g) in total.iter_mut().zip(part) {
            *acc += g;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    for g in &mut total {
        *g *= inv;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::baseline::ConstantBaseline;
    use crate::trainer::rollout::StepRecord;
    use crate::game::{EndReason, Termination};

    fn one_step(features: Vec<f64>, action: usize, reward: f64) -> Trajectory {
        Trajectory {
            scene_id: "toy".into(),
            target: 0,
            seed: 0,
            steps: vec![StepRecord {
                features,
                action,
                mask: vec![true, true],
                reward,
                ret: reward,
            }],
            rounds: Vec::new(),
            termination: Termination {
                reason: EndReason::EndToken,
                guess: 0,
                success: reward > 0.0,
                rounds: 0,
                step: 0,
            },
        }
    }

    struct Exact;
    impl Baseline for Exact {
        fn value(&self, f: &[f64]) -> f64 {
            f[0]
        }
    }

    #[test]
    fn baseline_equal_to_return_gives_zero() {
        // Feature 0 carries the return so the baseline can read it.
        let batch = vec![one_step(vec![1.5, 1.0], 0, 1.5), one_step(vec![0.0, 1.0], 1, 0.0)];
        let p = Policy::from_params(2, 2, vec![0.3, -0.2, 0.1, 0.4, 0.0, 0.5]).unwrap();
        let g = policy_gradient(&batch, &p, &Exact, &GradientOptions::default()).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn doubling_rewards_doubles_gradient() {
        let p = Policy::from_params(2, 1, vec![0.3, -0.2, 0.1, 0.4]).unwrap();
        let batch = vec![one_step(vec![1.0], 0, 1.0), one_step(vec![1.0], 1, 0.25)];
        let doubled = vec![one_step(vec![1.0], 0, 2.0), one_step(vec![1.0], 1, 0.5)];
        let g1 = policy_gradient(&batch, &p, &ConstantBaseline(0.0), &GradientOptions::default()).unwrap();
        let g2 = policy_gradient(&doubled, &p, &ConstantBaseline(0.0), &GradientOptions::default()).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let p = Policy::zeros(2, 1);
        assert!(matches!(
            policy_gradient(&[], &p, &ConstantBaseline(0.0), &GradientOptions::default()),
            Err(Error::EmptyBatch)
        ));
    }
}
