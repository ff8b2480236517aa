use crate::error::{Error, Result};

use super::config::{RatioMode, TrainConfig};
use super::policy::{Logits, ToyPolicy};

/// One sampled rollout with the behavior policy's log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tokens: Vec<usize>,
    pub old_logprobs: Vec<f64>,
    pub reward: f64,
    pub advantage: f64,
}

impl Trajectory {
    pub fn new(tokens: Vec<usize>, old_logprobs: Vec<f64>, reward: f64, advantage: f64) -> Result<Self> {
        if tokens.len() != old_logprobs.len() {
            return Err(Error::LengthMismatch(tokens.len(), old_logprobs.len()));
        }
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if old_logprobs.iter().any(|&lp| !(lp <= 0.0)) {
            return Err(Error::InvalidConfig("old log-probabilities must be <= 0".into()));
        }
        Ok(Trajectory { tokens, old_logprobs, reward, advantage })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn importance_ratio_token(new_logprob: f64, old_logprob: f64) -> f64 {
    (new_logprob - old_logprob).exp()
}

/// `exp(mean_t (new_t - old_t))`.
pub fn importance_ratio_sequence(new_logprobs: &[f64], old_logprobs: &[f64]) -> Result<f64> {
    if new_logprobs.len() != old_logprobs.len() {
        return Err(Error::LengthMismatch(new_logprobs.len(), old_logprobs.len()));
    }
    if new_logprobs.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mean = new_logprobs.iter().zip(old_logprobs).map(|(n, o)| n - o).sum::<f64>() / new_logprobs.len() as f64;
    Ok(mean.exp())
}

/// `min(w A, clip(w, 1 - eps, 1 + eps) A)`.
pub fn clip_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of [`clip_objective`] with respect to `ln ratio`.
fn clip_objective_dlog(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    if ratio * advantage <= clipped * advantage {
        ratio * advantage
    } else {
        0.0
    }
}

/// Advantage-gated log-likelihood: `max(0, A) * logprob`.
pub fn sft_term(advantage: f64, logprob: f64) -> f64 {
    advantage.max(0.0) * logprob
}

/// Objective value and its gradient with respect to the policy logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub gradient: Logits,
}

fn validate_batch(policy: &ToyPolicy, groups: &[Vec<Trajectory>], cfg: &TrainConfig) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for group in groups {
        if group.len() != cfg.group_size {
            return Err(Error::LengthMismatch(group.len(), cfg.group_size));
        }
        for traj in group {
            if traj.tokens.len() != traj.old_logprobs.len() {
                return Err(Error::LengthMismatch(traj.tokens.len(), traj.old_logprobs.len()));
            }
            if traj.tokens.is_empty() {
                return Err(Error::EmptySequence);
            }
            if traj.tokens.len() > policy.positions() {
                return Err(Error::LengthMismatch(traj.tokens.len(), policy.positions()));
            }
            if traj.tokens.iter().any(|&y| y >= policy.vocab()) {
                return Err(Error::InvalidConfig("token outside the policy vocabulary".into()));
            }
        }
    }
    Ok(())
}

/// Stable-GRPO objective over `groups`, maximized by the trainer.
pub fn stable_grpo_objective(policy: &ToyPolicy, groups: &[Vec<Trajectory>], cfg: &TrainConfig) -> Result<Objective> {
    stable_grpo_objective_with_reference(policy, groups, cfg, None)
}

/// As [`stable_grpo_objective`], additionally subtracting
/// `kl_coef * mean_t KL(reference_t || policy_t)` when `cfg.kl_enabled`.
pub fn stable_grpo_objective_with_reference(
    policy: &ToyPolicy,
    groups: &[Vec<Trajectory>],
    cfg: &TrainConfig,
    reference: Option<&ToyPolicy>,
) -> Result<Objective> {
    validate_batch(policy, groups, cfg)?;
    let positions = policy.positions();
    let vocab = policy.vocab();
    let log_probs: Vec<Vec<f64>> = (0..positions).map(|t| policy.log_probs(t)).collect();
    let mut gradient = Logits::zeros(positions, vocab);
    let mut value = 0.0;
    let group_weight = 1.0 / groups.len() as f64;

    for group in groups {
        let traj_weight = group_weight / group.len() as f64;
        for traj in group {
            let len = traj.len() as f64;
            let new: Vec<f64> = traj.tokens.iter().enumerate().map(|(t, &y)| log_probs[t][y]).collect();
            let a = traj.advantage;
            let sft_coef = cfg.gamma * a.max(0.0);

            // d(per-trajectory value)/d(new_t), one entry per token
            let mut dnew = vec![0.0; traj.len()];
            let mut traj_value = 0.0;
            match cfg.ratio_mode {
                RatioMode::Token => {
                    for t in 0..traj.len() {
                        let w = importance_ratio_token(new[t], traj.old_logprobs[t]);
                        traj_value += clip_objective(w, a, cfg.clip_epsilon) + cfg.gamma * sft_term(a, new[t]);
                        dnew[t] = clip_objective_dlog(w, a, cfg.clip_epsilon) + sft_coef;
                    }
                    traj_value /= len;
                    dnew.iter_mut().for_each(|d| *d /= len);
                }
                RatioMode::Sequence => {
                    let s = importance_ratio_sequence(&new, &traj.old_logprobs)?;
                    let dclip = clip_objective_dlog(s, a, cfg.clip_epsilon) / len;
                    let sft: f64 = new.iter().map(|&lp| sft_term(a, lp)).sum();
                    traj_value = clip_objective(s, a, cfg.clip_epsilon) + cfg.gamma * sft / len;
                    dnew.iter_mut().for_each(|d| *d = dclip + sft_coef / len);
                }
            }
            value += traj_weight * traj_value;

            // d new_t / d logits[t][v] = 1[v = y_t] - p_t(v)
            for (t, (&y, &d)) in traj.tokens.iter().zip(&dnew).enumerate() {
                if d == 0.0 {
                    continue;
                }
                let coef = traj_weight * d;
                let row = gradient.row_mut(t);
                for (v, g) in row.iter_mut().enumerate() {
                    let indicator = if v == y { 1.0 } else { 0.0 };
                    *g += coef * (indicator - log_probs[t][v].exp());
                }
            }
        }
    }

    if cfg.kl_enabled {
        let reference = reference.ok_or_else(|| Error::InvalidConfig("kl_enabled requires a reference policy".into()))?;
        if reference.positions() != positions || reference.vocab() != vocab {
            return Err(Error::LengthMismatch(reference.positions() * reference.vocab(), positions * vocab));
        }
        let weight = cfg.kl_coef / positions as f64;
        for (t, lp) in log_probs.iter().enumerate() {
            let ref_lp = reference.log_probs(t);
            let kl: f64 = ref_lp.iter().zip(lp).map(|(r, p)| if *r == f64::NEG_INFINITY { 0.0 } else { r.exp() * (r - p) }).sum();
            value -= weight * kl;
            // d KL(ref || pi) / d logits = pi - ref
            for (v, g) in gradient.row_mut(t).iter_mut().enumerate() {
                *g -= weight * (lp[v].exp() - ref_lp[v].exp());
            }
        }
    }

    Ok(Objective { value, gradient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn token_ratio_examples() {
        assert_eq!(importance_ratio_token(-1.0, -1.0), 1.0);
        assert!((importance_ratio_token(-0.5, -1.5) - E).abs() < 1e-12);
        assert!((importance_ratio_token(-2.0, -1.0) - 0.36787944117144233).abs() < 1e-12);
    }

    #[test]
    fn sequence_ratio_examples() {
        assert_eq!(importance_ratio_sequence(&[-1.0, -2.0], &[-1.0, -2.0]).unwrap(), 1.0);
        assert!((importance_ratio_sequence(&[-1.0, -2.0], &[-2.0, -3.0]).unwrap() - E).abs() < 1e-12);
        assert_eq!(
            importance_ratio_sequence(&[-0.3], &[-0.8]).unwrap(),
            importance_ratio_token(-0.3, -0.8)
        );
        assert_eq!(importance_ratio_sequence(&[], &[]), Err(Error::EmptySequence));
        assert_eq!(importance_ratio_sequence(&[-1.0], &[]), Err(Error::LengthMismatch(1, 0)));
    }

    #[test]
    fn clip_examples() {
        for a in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            assert_eq!(clip_objective(1.0, a, 0.2), a);
        }
        assert!((clip_objective(1.5, 1.0, 0.2) - 1.2).abs() < 1e-12);
        assert!((clip_objective(0.5, -1.0, 0.2) - (-0.8)).abs() < 1e-12);
        // pessimistic branch: large ratio with negative advantage stays unclipped
        assert_eq!(clip_objective(2.0, -1.0, 0.2), -2.0);
    }

    #[test]
    fn sft_examples() {
        assert_eq!(sft_term(-2.0, -1.0), 0.0);
        assert_eq!(sft_term(0.0, -1.0), 0.0);
        assert_eq!(sft_term(2.0, -0.5), -1.0);
    }

    #[test]
    fn trajectory_validation() {
        assert!(Trajectory::new(vec![0], vec![-0.1, -0.2], 0.0, 0.0).is_err());
        assert_eq!(Trajectory::new(vec![], vec![], 0.0, 0.0), Err(Error::EmptySequence));
        assert!(Trajectory::new(vec![0], vec![0.5], 0.0, 0.0).is_err());
    }

    #[test]
    fn empty_batch_and_group_size() {
        let policy = ToyPolicy::uniform(2, 3);
        let cfg = TrainConfig { group_size: 2, ..TrainConfig::default() };
        assert_eq!(stable_grpo_objective(&policy, &[], &cfg), Err(Error::EmptyBatch));
        let t = Trajectory::new(vec![0, 1], policy.sequence_logprobs(&[0, 1]), 0.0, 0.0).unwrap();
        assert_eq!(stable_grpo_objective(&policy, &[vec![t]], &cfg), Err(Error::LengthMismatch(1, 2)));
    }

    #[test]
    fn kl_requires_reference() {
        let policy = ToyPolicy::uniform(1, 2);
        let cfg = TrainConfig { group_size: 2, kl_enabled: true, ..TrainConfig::default() };
        let t = Trajectory::new(vec![0], vec![-(2f64.ln())], 0.0, 0.0).unwrap();
        let batch = vec![vec![t.clone(), t]];
        assert!(stable_grpo_objective(&policy, &batch, &cfg).is_err());
        let obj = stable_grpo_objective_with_reference(&policy, &batch, &cfg, Some(&policy)).unwrap();
        assert_eq!(obj.value, 0.0);
        assert_eq!(obj.gradient.max_abs(), 0.0);
    }
}
