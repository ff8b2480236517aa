use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::RewardVector;

/// Additive optimism of the saturating pointwise provider.
pub const SQM_BIAS: f64 = 0.4;

/// Synthetic stand-in for translation: each source has a fixed target
/// token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTask {
    targets: Vec<Vec<usize>>,
    vocab: usize,
}

impl ToyTask {
    pub fn random<R: Rng + ?Sized>(num_sources: usize, positions: usize, vocab: usize, rng: &mut R) -> Self {
        let targets = (0..num_sources).map(|_| (0..positions).map(|_| rng.gen_range(0..vocab)).collect()).collect();
        ToyTask { targets, vocab }
    }

    pub fn targets(&self) -> &[Vec<usize>] {
        &self.targets
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }
}

/// Fraction of positions where `candidate` matches `target`.
pub fn oracle_quality(target: &[usize], candidate: &[usize]) -> Result<f64> {
    if target.len() != candidate.len() {
        return Err(Error::LengthMismatch(target.len(), candidate.len()));
    }
    if target.is_empty() {
        return Err(Error::EmptySequence);
    }
    let hits = target.iter().zip(candidate).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / target.len() as f64)
}

/// Dense within-group ranks of `qualities` mapped linearly onto `[0, 1]`.
/// Tied qualities share a rank; an all-tied group gets 0.5 everywhere.
pub(crate) fn rank_rewards(qualities: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = qualities.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return vec![0.5; qualities.len()];
    }
    let top = (distinct.len() - 1) as f64;
    qualities
        .iter()
        .map(|q| distinct.iter().position(|d| d == q).unwrap_or(0) as f64 / top)
        .collect()
}

/// Joint group scorer: rewards are the within-group ranks of oracle quality.
pub fn reward_provider_gqm(candidates: &[Vec<usize>], target: &[usize]) -> Result<RewardVector> {
    if candidates.len() < 2 {
        return Err(Error::GroupTooSmall(candidates.len()));
    }
    let qualities = candidates.iter().map(|c| oracle_quality(target, c)).collect::<Result<Vec<_>>>()?;
    Ok(rank_rewards(&qualities).into())
}

/// Pointwise scorer that saturates: `min(1, quality + 0.4)`.
pub fn reward_provider_saturating_sqm(candidate: &[usize], target: &[usize]) -> Result<f64> {
    Ok((oracle_quality(target, candidate)? + SQM_BIAS).min(1.0))
}

/// Soft overlong penalty: 1 up to `max_len - buffer`, then a linear ramp
/// down to 0 at `max_len`, and 0 beyond.
pub fn length_penalty(length: usize, max_len: usize, buffer: usize) -> Result<f64> {
    if max_len <= buffer {
        return Err(Error::InvalidBufferConfig { max_len, buffer });
    }
    let free = max_len - buffer;
    Ok(if length <= free {
        1.0
    } else if length >= max_len {
        0.0
    } else {
        (max_len - length) as f64 / buffer as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provider {
    Gqm,
    SaturatingSqm,
}

impl Provider {
    /// Rewards for a group of rollouts against one target.
    pub fn score(self, candidates: &[Vec<usize>], target: &[usize]) -> Result<Vec<f64>> {
        match self {
            Provider::Gqm => reward_provider_gqm(candidates, target).map(RewardVector::into_inner),
            Provider::SaturatingSqm => candidates.iter().map(|c| reward_provider_saturating_sqm(c, target)).collect(),
        }
    }
}

impl FromStr for Provider {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gqm" => Ok(Provider::Gqm),
            "sqm" | "saturating_sqm" => Ok(Provider::SaturatingSqm),
            _ => Err(Error::InvalidConfig(format!("unknown provider {s:?} (gqm|sqm)"))),
        }
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provider::Gqm => "gqm",
            Provider::SaturatingSqm => "sqm",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_examples() {
        assert_eq!(oracle_quality(&[1, 2, 3, 4], &[1, 2, 3, 4]).unwrap(), 1.0);
        assert_eq!(oracle_quality(&[1, 2, 3, 4], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(oracle_quality(&[1, 2, 3, 4], &[1, 2, 0, 0]).unwrap(), 0.5);
        assert_eq!(oracle_quality(&[1, 2], &[1]), Err(Error::LengthMismatch(2, 1)));
    }

    #[test]
    fn gqm_examples() {
        let target = [0, 0, 0, 0];
        let r = reward_provider_gqm(&[vec![0, 0, 0, 1], vec![0, 1, 1, 1]], &target).unwrap();
        assert_eq!(r.values(), &[1.0, 0.0]);
        let r = reward_provider_gqm(&[vec![0, 1, 1, 1], vec![0, 1, 1, 1]], &target).unwrap();
        assert_eq!(r[0], r[1]);
        assert_eq!(rank_rewards(&[0.5, 1.0, 0.0]), vec![0.5, 1.0, 0.0]);
        assert_eq!(rank_rewards(&[0.25, 0.75, 0.25, 0.5]), vec![0.0, 1.0, 0.0, 0.5]);
        assert_eq!(reward_provider_gqm(&[vec![0]], &[0]), Err(Error::GroupTooSmall(1)));
    }

    #[test]
    fn sqm_examples() {
        let target = [0; 10];
        let with_hits = |k: usize| -> Vec<usize> { (0..10).map(|i| usize::from(i >= k)).collect() };
        assert_eq!(reward_provider_saturating_sqm(&with_hits(10), &target).unwrap(), 1.0);
        assert_eq!(reward_provider_saturating_sqm(&with_hits(7), &target).unwrap(), 1.0);
        assert!((reward_provider_saturating_sqm(&with_hits(1), &target).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn length_penalty_examples() {
        assert_eq!(length_penalty(10, 100, 20).unwrap(), 1.0);
        assert_eq!(length_penalty(100, 100, 20).unwrap(), 0.0);
        assert_eq!(length_penalty(90, 100, 20).unwrap(), 0.5);
        assert_eq!(length_penalty(150, 100, 20).unwrap(), 0.0);
        assert_eq!(length_penalty(5, 5, 0).unwrap(), 1.0);
        assert_eq!(length_penalty(1, 20, 20), Err(Error::InvalidBufferConfig { max_len: 20, buffer: 20 }));
    }

    #[test]
    fn provider_parsing() {
        assert_eq!("gqm".parse::<Provider>().unwrap(), Provider::Gqm);
        assert_eq!("sqm".parse::<Provider>().unwrap(), Provider::SaturatingSqm);
        assert!("bleurt".parse::<Provider>().is_err());
    }
}
