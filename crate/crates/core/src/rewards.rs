//! Goal-achieved, progressive and informativeness rewards, their attachment
//! to token-level steps, and undiscounted suffix-sum returns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Answer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight of the round bonus in the goal-achieved reward.
    pub lambda: f64,
    /// Informativeness bonus.
    pub eta: f64,
    pub j_max: usize,
    pub goal: bool,
    pub progressive: bool,
    pub informativeness: bool,
    /// Success indicator as the only reward. Excludes the three above.
    pub sole_reward: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            lambda: 0.1,
            eta: 0.1,
            j_max: 5,
            goal: true,
            progressive: true,
            informativeness: true,
            sole_reward: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("rewards.lambda", "must be a finite value >= 0"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("rewards.eta", "must be a finite value >= 0"));
        }
        if self.j_max == 0 {
            return Err(Error::config("rewards.j_max", "must be >= 1"));
        }
        if self.sole_reward && (self.goal || self.progressive || self.informativeness) {
            return Err(Error::config(
                "rewards.sole_reward",
                "cannot be combined with rewards.goal, rewards.progressive or rewards.informativeness",
            ));
        }
        Ok(())
    }

    /// `goal` alone, `goal + progressive`, ... as named in reports.
    pub fn label(&self) -> String {
        if self.sole_reward {
            return "sole-r".into();
        }
        let parts: Vec<&str> = [
            (self.goal, "r_g"),
            (self.progressive, "r_p"),
            (self.informativeness, "r_i"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|&(_, n)| n)
        .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

/// `1 + lambda * J_max / J` on success, 0 otherwise.
pub fn goal_reward(success: bool, rounds: usize, cfg: &RewardConfig) -> Result<f64> {
    if rounds == 0 {
        return Err(Error::ZeroRounds);
    }
    Ok(if success {
        1.0 + cfg.lambda * cfg.j_max as f64 / rounds as f64
    } else {
        0.0
    })
}

pub fn progressive_reward(p_j: f64, p_prev: f64) -> f64 {
    p_j - p_prev
}

/// `eta` if the per-object answers are not all identical.
pub fn informativeness_reward(answers: &[Answer], cfg: &RewardConfig) -> Result<f64> {
    let first = answers.first().ok_or(Error::NoAnswers)?;
    Ok(if answers.iter().any(|a| a != first) { cfg.eta } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReward {
    pub t: usize,
    pub value: f64,
}

/// Reward inputs of one completed round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRewards {
    /// Step whose action emitted the round's `?`.
    pub question_step: usize,
    /// Zero for the first round.
    pub progressive: f64,
    pub informativeness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalOutcome {
    /// The `<End>` step, or the last `?` step when the round limit hit.
    pub step: usize,
    pub success: bool,
    /// Completed question-answer rounds.
    pub rounds: usize,
}

/// Goal reward for a finished dialog. A dialog with no rounds is scored as
/// one round so that the bonus stays finite.
pub fn terminal_goal_reward(outcome: &TerminalOutcome, cfg: &RewardConfig) -> f64 {
    goal_reward(outcome.success, outcome.rounds.max(1), cfg).expect("rounds clamped to >= 1")
}

/// Spreads round and terminal rewards over `n_steps` token steps.
pub fn assemble_step_rewards(
    n_steps: usize,
    rounds: &[RoundRewards],
    terminal: &TerminalOutcome,
    cfg: &RewardConfig,
) -> Result<Vec<StepReward>> {
    if rounds.len() != terminal.rounds {
        return Err(Error::RewardAssembly(format!(
            "{} round records for a dialog of {} rounds",
            rounds.len(),
            terminal.rounds
        )));
    }
    if rounds.len() > cfg.j_max {
        return Err(Error::RewardAssembly(format!("{} rounds exceed j_max = {}", rounds.len(), cfg.j_max)));
    }
    if n_steps == 0 || terminal.step != n_steps - 1 {
        return Err(Error::RewardAssembly(format!(
            "terminal step {} is not the last of {n_steps} steps",
            terminal.step
        )));
    }
    if rounds.windows(2).any(|w| w[0].question_step >= w[1].question_step)
        || rounds.iter().any(|r| r.question_step >= n_steps)
    {
        return Err(Error::RewardAssembly("question steps must be increasing and in range".into()));
    }
    let mut values = vec![0.0; n_steps];
    if cfg.sole_reward {
        if terminal.success {
            values[terminal.step] = 1.0;
        }
    } else {
        for r in rounds {
            if cfg.progressive {
                values[r.question_step] += r.progressive;
            }
            if cfg.informativeness {
                values[r.question_step] += r.informativeness;
            }
        }
        if cfg.goal {
            values[terminal.step] += terminal_goal_reward(terminal, cfg);
        }
    }
    Ok(values.into_iter().enumerate().map(|(t, value)| StepReward { t, value }).collect())
}

/// `Q_t = sum_{t' >= t} r_{t'}`, accumulated from the end.
pub fn returns(rewards: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (q, &r) in out.iter_mut().zip(rewards).rev() {
        acc += r;
        *q = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RewardConfig {
        RewardConfig::default()
    }

    #[test]
    fn goal_reward_examples() {
        assert_eq!(goal_reward(true, 2, &cfg()).unwrap(), 1.25);
        assert_eq!(goal_reward(false, 3, &cfg()).unwrap(), 0.0);
        assert!((goal_reward(true, 5, &cfg()).unwrap() - 1.1).abs() < 1e-15);
        assert!(goal_reward(true, 0, &cfg()).is_err());
        for j in 1..5 {
            assert!(goal_reward(true, j, &cfg()).unwrap() > goal_reward(true, j + 1, &cfg()).unwrap());
        }
    }

    #[test]
    fn progressive_examples() {
        assert!((progressive_reward(0.6, 0.4) - 0.2).abs() < 1e-15);
        assert!((progressive_reward(0.3, 0.5) + 0.2).abs() < 1e-15);
        assert_eq!(progressive_reward(0.37, 0.37), 0.0);
    }

    #[test]
    fn informativeness_examples() {
        use Answer::*;
        assert_eq!(informativeness_reward(&[Yes, No, Yes], &cfg()).unwrap(), 0.1);
        assert_eq!(informativeness_reward(&[Yes, Yes, Yes], &cfg()).unwrap(), 0.0);
        assert_eq!(informativeness_reward(&[Yes], &cfg()).unwrap(), 0.0);
        assert!(informativeness_reward(&[], &cfg()).is_err());
    }

    fn two_round_episode() -> (Vec<RoundRewards>, TerminalOutcome) {
        (
            vec![
                RoundRewards {
                    question_step: 2,
                    progressive: 0.0,
                    informativeness: 0.15,
                },
                RoundRewards {
                    question_step: 5,
                    progressive: 0.15,
                    informativeness: 0.1,
                },
            ],
            TerminalOutcome {
                step: 6,
                success: true,
                rounds: 2,
            },
        )
    }

    #[test]
    fn hand_built_episode_attachment() {
        let (rounds, terminal) = two_round_episode();
        let rewards = assemble_step_rewards(7, &rounds, &terminal, &cfg()).unwrap();
        let nonzero: Vec<(usize, f64)> = rewards.iter().filter(|r| r.value != 0.0).map(|r| (r.t, r.value)).collect();
        assert_eq!(nonzero.len(), 3);
        assert_eq!(nonzero[0], (2, 0.15));
        assert_eq!(nonzero[1].0, 5);
        assert!((nonzero[1].1 - 0.25).abs() < 1e-15);
        assert_eq!(nonzero[2], (6, 1.25));
    }

    #[test]
    fn sole_and_disabled_rewards() {
        let (rounds, mut terminal) = two_round_episode();
        let sole = RewardConfig {
            goal: false,
            progressive: false,
            informativeness: false,
            sole_reward: true,
            ..cfg()
        };
        terminal.success = false;
        assert!(assemble_step_rewards(7, &rounds, &terminal, &sole).unwrap().iter().all(|r| r.value == 0.0));
        terminal.success = true;
        let won: Vec<f64> = assemble_step_rewards(7, &rounds, &terminal, &sole).unwrap().iter().map(|r| r.value).collect();
        assert_eq!(won, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let off = RewardConfig {
            goal: false,
            progressive: false,
            informativeness: false,
            ..cfg()
        };
        assert!(assemble_step_rewards(7, &rounds, &terminal, &off).unwrap().iter().all(|r| r.value == 0.0));
    }

    #[test]
    fn mismatched_rounds_are_rejected() {
        let (rounds, terminal) = two_round_episode();
        assert!(assemble_step_rewards(7, &rounds[..1], &terminal, &cfg()).is_err());
        assert!(assemble_step_rewards(8, &rounds, &terminal, &cfg()).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = RewardConfig { lambda: -1.0, ..cfg() };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { key, .. }) if key == "rewards.lambda"));
        let both = RewardConfig { sole_reward: true, ..cfg() };
        assert!(both.validate().is_err());
        assert_eq!(cfg().label(), "r_g+r_p+r_i");
    }

    #[test]
    fn return_examples() {
        let q = returns(&[0.0, 0.0, 0.1, 0.0, 0.0, 1.25]);
        let expected = [1.35, 1.35, 1.35, 1.25, 1.25, 1.25];
        for (a, b) in q.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(returns(&[0.0; 4]), vec![0.0; 4]);
        assert!(returns(&[]).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn returns_equal_double_loop(rewards in proptest::collection::vec(-2.0f64..2.0, 0..60)) {
                let q = returns(&rewards);
                for t in 0..rewards.len() {
                    let mut s = 0.0;
                    for t2 in (t..rewards.len()).rev() {
                        s += rewards[t2];
                    }
                    prop_assert_eq!(q[t].to_bits(), s.to_bits());
                }
            }

            // On a dyadic grid every partial sum is exact, so the recurrence holds exactly.
            #[test]
            fn return_recurrence_is_exact_on_dyadic_rewards(raw in proptest::collection::vec(-1024i32..1024, 1..60)) {
                let rewards: Vec<f64> = raw.iter().map(|&k| f64::from(k) / 1024.0).collect();
                let q = returns(&rewards);
                for t in 0..rewards.len() - 1 {
                    prop_assert_eq!(q[t] - q[t + 1], rewards[t]);
                }
                if rewards.iter().all(|&r| r >= 0.0) {
                    prop_assert!(q.windows(2).all(|w| w[0] >= w[1]));
                }
            }

            #[test]
            fn goal_reward_range(j in 1usize..=5, success: bool) {
                let c = RewardConfig::default();
                let r = goal_reward(success, j, &c).unwrap();
                if success {
                    prop_assert!(r >= 1.0 + c.lambda - 1e-12 && r <= 1.0 + c.lambda * c.j_max as f64 + 1e-12);
                } else {
                    prop_assert_eq!(r, 0.0);
                }
            }
        }
    }
}
