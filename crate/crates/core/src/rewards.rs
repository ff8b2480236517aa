//! Ranking and score-consistency rewards for group judgments.
//!
//! `R_acc` is the fraction of candidate pairs whose predicted order (ties
//! included) matches the ground truth. `R_score` averages a discrete kernel
//! over pairwise margin errors. The training reward is
//! `gate * (R_acc + R_score)`, where the gate checks that a judgment's
//! explicit ranking agrees with its own scores.

use crate::error::{Error, Result};
use crate::ranking_io::{consistency_gate, SCORE_CEILING};
use crate::types::Judgment;

/// Upper bound of `R_acc + R_score`.
pub const DEFAULT_RAW_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    /// Ground-truth differences with magnitude at most this count as ties.
    pub tie_epsilon: f64,
    pub score_ceiling: i64,
    pub scale_target_max: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { tie_epsilon: 0.0, score_ceiling: SCORE_CEILING as i64, scale_target_max: 0.1 }
    }
}

impl RewardConfig {
    pub fn new(tie_epsilon: f64, score_ceiling: i64, scale_target_max: f64) -> Result<Self> {
        if !(tie_epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!("tie_epsilon must be >= 0, got {tie_epsilon}")));
        }
        if !(scale_target_max > 0.0) {
            return Err(Error::InvalidConfig(format!("scale_target_max must be > 0, got {scale_target_max}")));
        }
        Ok(RewardConfig { tie_epsilon, score_ceiling, scale_target_max })
    }
}

fn sign_with_tolerance(x: f64, eps: f64) -> i8 {
    if x.abs() <= eps {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// 1 if the predicted pair relation (ties included) matches the ground truth.
///
/// `tie_epsilon` applies only to the ground-truth difference; predictions
/// use the exact sign.
pub fn pairwise_agreement(q_i: f64, q_j: f64, r_i: f64, r_j: f64, tie_epsilon: f64) -> u8 {
    u8::from(sign_with_tolerance(r_i - r_j, 0.0) == sign_with_tolerance(q_i - q_j, tie_epsilon))
}

fn check_pair_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a < 2 {
        return Err(Error::GroupTooSmall(a));
    }
    Ok(())
}

fn pair_count(g: usize) -> f64 {
    (g * (g - 1) / 2) as f64
}

/// Fraction of correctly ordered pairs over all `C(G, 2)` pairs.
pub fn ranking_accuracy(q: &[f64], r: &[f64], tie_epsilon: f64) -> Result<f64> {
    check_pair_lengths(q.len(), r.len())?;
    let g = q.len();
    let mut agree = 0u64;
    for i in 0..g {
        for j in i + 1..g {
            agree += pairwise_agreement(q[i], q[j], r[i], r[j], tie_epsilon) as u64;
        }
    }
    Ok(agree as f64 / pair_count(g))
}

/// Discrete kernel over integer deviations: 1.0, 0.6, 0.2, then 0.
pub fn margin_kernel(delta: u64) -> f64 {
    match delta {
        0 => 1.0,
        1 => 0.6,
        2 => 0.2,
        _ => 0.0,
    }
}

/// Rounds a non-negative deviation half away from zero and applies the kernel.
fn kernel_of_deviation(delta: f64) -> f64 {
    let rounded = delta.abs().round();
    if rounded > u64::MAX as f64 {
        0.0
    } else {
        margin_kernel(rounded as u64)
    }
}

/// Mean kernel value of the pairwise margin errors `|(r_i - r_j) - (q_i - q_j)|`.
pub fn score_consistency(q: &[f64], r: &[i64]) -> Result<f64> {
    check_pair_lengths(q.len(), r.len())?;
    let g = q.len();
    let mut total = 0.0;
    for i in 0..g {
        for j in i + 1..g {
            let predicted = (r[i] - r[j]) as f64;
            let truth = q[i] - q[j];
            total += kernel_of_deviation(predicted - truth);
        }
    }
    Ok(total / pair_count(g))
}

/// Reward components for one judged group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub r_acc: f64,
    pub r_score: f64,
    pub gate: bool,
    pub r_total: f64,
}

/// Full breakdown of the gated reward. `r_acc` and `r_score` are reported
/// even when the gate fails; `r_total` is then 0.
pub fn reward_breakdown(j: &Judgment, q: &[f64], cfg: &RewardConfig) -> Result<RewardBreakdown> {
    if j.len() != q.len() {
        return Err(Error::LengthMismatch(j.len(), q.len()));
    }
    let r = j.scores_in_label_order()?;
    let gate = consistency_gate(j.ranking(), j.scores())?;
    let r_f: Vec<f64> = r.iter().map(|&x| x as f64).collect();
    let r_acc = ranking_accuracy(q, &r_f, cfg.tie_epsilon)?;
    let r_score = score_consistency(q, &r)?;
    let r_total = if gate { r_acc + r_score } else { 0.0 };
    Ok(RewardBreakdown { r_acc, r_score, gate, r_total })
}

/// `gate * (R_acc + R_score)`, in `[0, 2]`.
pub fn total_reward(j: &Judgment, q: &[f64], cfg: &RewardConfig) -> Result<f64> {
    reward_breakdown(j, q, cfg).map(|b| b.r_total)
}

/// Pointwise variant: kernel of the absolute error between one predicted score and its ground truth.
pub fn sqm_kernel_reward(predicted: i64, q: f64, cfg: &RewardConfig) -> Result<f64> {
    if !(0..=cfg.score_ceiling).contains(&predicted) {
        return Err(Error::ScoreOutOfRange(predicted, cfg.score_ceiling));
    }
    Ok(kernel_of_deviation(predicted as f64 - q))
}

/// Linearly maps rewards from `[0, raw_max]` onto `[0, scale_target_max]`.
pub fn scale_rewards(rewards: &[f64], raw_max: f64, cfg: &RewardConfig) -> Result<Vec<f64>> {
    if !(raw_max > 0.0) {
        return Err(Error::InvalidConfig(format!("raw_max must be > 0, got {raw_max}")));
    }
    if let Some(&bad) = rewards.iter().find(|&&r| !(0.0..=raw_max).contains(&r)) {
        return Err(Error::RewardOutOfDeclaredRange { value: bad, max: raw_max });
    }
    let factor = cfg.scale_target_max / raw_max;
    Ok(rewards.iter().map(|&r| r * factor).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Label, Preorder, ScoreMap};

    fn judgment(ranking: &[&[char]], scores: &[(char, u8)]) -> Judgment {
        let s: ScoreMap = scores.iter().map(|&(c, v)| (Label::from_char(c).unwrap(), v)).collect();
        Judgment::new("", Preorder::from_chars(ranking).unwrap(), s).unwrap()
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_agreement(3.0, 2.0, 5.0, 1.0, 0.0), 1);
        assert_eq!(pairwise_agreement(2.0, 2.0, 5.0, 5.0, 0.0), 1);
        assert_eq!(pairwise_agreement(1.0, 2.0, 2.0, 1.0, 0.0), 0);
        // strict truth vs predicted tie is a mismatch
        assert_eq!(pairwise_agreement(3.0, 2.0, 5.0, 5.0, 0.0), 0);
        // epsilon only widens ground-truth ties
        assert_eq!(pairwise_agreement(2.0, 2.05, 5.0, 5.0, 0.1), 1);
        assert_eq!(pairwise_agreement(2.0, 2.0, 5.0, 5.05, 0.1), 0);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(ranking_accuracy(&[3.0, 2.0, 2.0], &[5.0, 1.0, 1.0], 0.0).unwrap(), 1.0);
        assert_eq!(ranking_accuracy(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0], 0.0).unwrap(), 0.0);
        assert_eq!(ranking_accuracy(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0], 0.0).unwrap(), 2.0 / 3.0);
        assert_eq!(ranking_accuracy(&[1.0], &[1.0], 0.0), Err(Error::GroupTooSmall(1)));
        assert_eq!(ranking_accuracy(&[1.0, 2.0], &[1.0], 0.0), Err(Error::LengthMismatch(2, 1)));
    }

    #[test]
    fn kernel_table() {
        assert_eq!(margin_kernel(0), 1.0);
        assert_eq!(margin_kernel(1), 0.6);
        assert_eq!(margin_kernel(2), 0.2);
        assert_eq!(margin_kernel(3), 0.0);
        assert_eq!(margin_kernel(5), 0.0);
    }

    #[test]
    fn score_consistency_examples() {
        assert_eq!(score_consistency(&[6.0, 5.0], &[6, 5]).unwrap(), 1.0);
        assert_eq!(score_consistency(&[6.0, 5.0], &[7, 4]).unwrap(), 0.2);
        assert_eq!(score_consistency(&[5.0, 5.0], &[9, 2]).unwrap(), 0.0);
        // fractional margins round half away from zero: |1 - 0.5| = 0.5 -> 1
        assert_eq!(score_consistency(&[5.5, 5.0], &[6, 5]).unwrap(), 0.6);
        assert_eq!(score_consistency(&[5.6, 5.0], &[6, 5]).unwrap(), 1.0);
    }

    #[test]
    fn total_reward_examples() {
        let cfg = RewardConfig::default();
        let bad = judgment(&[&['A'], &['B']], &[('A', 5), ('B', 5)]);
        assert_eq!(total_reward(&bad, &[6.0, 5.0], &cfg).unwrap(), 0.0);
        let good = judgment(&[&['A'], &['B']], &[('A', 6), ('B', 5)]);
        assert_eq!(total_reward(&good, &[6.0, 5.0], &cfg).unwrap(), 2.0);
        assert_eq!(total_reward(&good, &[5.0, 6.0], &cfg).unwrap(), 0.2);
        assert_eq!(total_reward(&good, &[5.0, 6.0, 1.0], &cfg), Err(Error::LengthMismatch(2, 3)));
    }

    #[test]
    fn total_reward_requires_leading_labels() {
        let j = judgment(&[&['A'], &['C']], &[('A', 6), ('C', 5)]);
        assert_eq!(total_reward(&j, &[6.0, 5.0], &RewardConfig::default()), Err(Error::LabelSetMismatch));
    }

    #[test]
    fn sqm_examples() {
        let cfg = RewardConfig::default();
        assert_eq!(sqm_kernel_reward(7, 7.0, &cfg).unwrap(), 1.0);
        assert_eq!(sqm_kernel_reward(7, 6.0, &cfg).unwrap(), 0.6);
        assert_eq!(sqm_kernel_reward(7, 3.0, &cfg).unwrap(), 0.0);
        assert_eq!(sqm_kernel_reward(11, 3.0, &cfg), Err(Error::ScoreOutOfRange(11, 10)));
    }

    #[test]
    fn scaling_examples() {
        let cfg = RewardConfig::default();
        let s = scale_rewards(&[2.0, 1.0, 0.0], DEFAULT_RAW_MAX, &cfg).unwrap();
        assert_eq!(s, vec![0.1, 0.05, 0.0]);
        assert_eq!(scale_rewards(&[0.0], 2.0, &cfg).unwrap(), vec![0.0]);
        assert_eq!(
            scale_rewards(&[2.5], 2.0, &cfg),
            Err(Error::RewardOutOfDeclaredRange { value: 2.5, max: 2.0 })
        );
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::new(-0.1, 10, 0.1).is_err());
        assert!(RewardConfig::new(0.0, 10, 0.0).is_err());
        assert!(RewardConfig::new(0.5, 10, 0.1).is_ok());
    }
}
