//! Group-relative advantage estimators and per-group saturation diagnostics.

use crate::error::{Error, Result};
use crate::types::AdvantageVector;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn all_equal(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// Population standard deviation; exactly 0 when all values are equal.
fn population_std(xs: &[f64], mean: f64) -> f64 {
    if all_equal(xs) {
        return 0.0;
    }
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `A_i = (r_i - mean) / std` with population std. Degenerate groups
/// (all rewards equal) get all-zero advantages.
pub fn grpo_advantage(rewards: &[f64]) -> Result<AdvantageVector> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    if all_equal(rewards) {
        return Ok(vec![0.0; rewards.len()].into());
    }
    let m = mean(rewards);
    let s = population_std(rewards, m);
    Ok(rewards.iter().map(|r| (r - m) / s).collect::<Vec<_>>().into())
}

/// Mean-only variant without std normalization: `A_i = r_i - mean`.
pub fn dr_grpo_advantage(rewards: &[f64]) -> Result<AdvantageVector> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    if all_equal(rewards) {
        return Ok(vec![0.0; rewards.len()].into());
    }
    let m = mean(rewards);
    Ok(rewards.iter().map(|r| r - m).collect::<Vec<_>>().into())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupDiagnostics {
    pub mean_reward: f64,
    pub reward_std: f64,
    /// Fraction of rewards equal to the ceiling.
    pub saturation_rate: f64,
    /// Zero reward spread, hence all-zero advantages.
    pub vanished: bool,
}

pub fn group_diagnostics(rewards: &[f64], ceiling: f64) -> GroupDiagnostics {
    if rewards.is_empty() {
        return GroupDiagnostics { mean_reward: f64::NAN, reward_std: f64::NAN, saturation_rate: 0.0, vanished: true };
    }
    let mean_reward = if all_equal(rewards) { rewards[0] } else { mean(rewards) };
    let reward_std = population_std(rewards, mean_reward);
    let at_ceiling = rewards.iter().filter(|&&r| r == ceiling).count();
    GroupDiagnostics {
        mean_reward,
        reward_std,
        saturation_rate: at_ceiling as f64 / rewards.len() as f64,
        vanished: reward_std == 0.0,
    }
}
