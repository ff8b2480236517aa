//! Group construction for reward-model data: group-size sampling, reference
//! injection, shuffle/subsample augmentation and evaluation-group selection.
//!
//! Every operation draws from an explicit rng, so outputs are a pure
//! function of `(input, seed)`. Parallel generation should give task `i`
//! its own rng from [`task_rng`].

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::CandidateGroup;

/// Probability that the reference replaces a candidate.
pub const REFERENCE_INJECTION_PROB: f64 = 0.5;

/// Independent rng for task `i` of a run seeded with `base_seed`.
pub fn task_rng(base_seed: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(i))
}

/// Draws a group size from {2, 3, 4} with frequency ratio 1:1:3.
pub fn sample_group_size<R: Rng + ?Sized>(rng: &mut R) -> usize {
    match rng.gen_range(0..5) {
        0 => 2,
        1 => 3,
        _ => 4,
    }
}

/// With probability 0.5, replaces one uniformly chosen candidate with the
/// reference. The group size is preserved; ground truth is dropped on
/// injection because the reference has no annotation yet.
pub fn inject_reference<R: Rng + ?Sized>(group: &CandidateGroup, reference: &str, rng: &mut R) -> Result<CandidateGroup> {
    if !rng.gen_bool(REFERENCE_INJECTION_PROB) {
        return Ok(group.clone());
    }
    let slot = rng.gen_range(0..group.len());
    let texts: Vec<String> = group
        .texts()
        .enumerate()
        .map(|(i, t)| if i == slot { reference.to_string() } else { t.to_string() })
        .collect();
    CandidateGroup::new(group.source(), texts, None)
}

/// Uniformly permutes candidates (ground truth follows) and relabels.
pub fn shuffle_augment<R: Rng + ?Sized>(group: &CandidateGroup, rng: &mut R) -> Result<CandidateGroup> {
    if group.ground_truth().is_none() {
        return Err(Error::MissingGroundTruth);
    }
    let mut order: Vec<usize> = (0..group.len()).collect();
    order.shuffle(rng);
    group.reindexed(&order)
}

/// Uniform `k`-subset without replacement, keeping the original relative order.
pub fn subsample_group<R: Rng + ?Sized>(group: &CandidateGroup, k: usize, rng: &mut R) -> Result<CandidateGroup> {
    if k < 2 || k > group.len() {
        return Err(Error::InvalidSubsampleSize { k, size: group.len() });
    }
    let mut order = index::sample(rng, group.len(), k).into_vec();
    order.sort_unstable();
    group.reindexed(&order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutput {
    pub system_id: String,
    pub candidate: String,
    /// Rater-averaged human quality score.
    pub human_score: f64,
}

/// All system outputs available for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutputs {
    source: String,
    outputs: Vec<SystemOutput>,
}

impl SystemOutputs {
    pub fn new(source: impl Into<String>, outputs: Vec<SystemOutput>) -> Result<Self> {
        if outputs.len() < 2 {
            return Err(Error::PoolTooSmall(outputs.len()));
        }
        if let Some(o) = outputs.iter().find(|o| !o.human_score.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite human score for system {:?}", o.system_id)));
        }
        Ok(SystemOutputs { source: source.into(), outputs })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn outputs(&self) -> &[SystemOutput] {
        &self.outputs
    }
}

/// Builds an evaluation group from a pool: size drawn 1:1:3 from {2,3,4}
/// (capped at the pool size), always containing a minimum- and a
/// maximum-scored output, other slots filled uniformly, order shuffled.
pub fn build_eval_groups<R: Rng + ?Sized>(pool: &SystemOutputs, rng: &mut R) -> Result<CandidateGroup> {
    let outputs = pool.outputs();
    if outputs.len() < 2 {
        return Err(Error::PoolTooSmall(outputs.len()));
    }
    let size = sample_group_size(rng).min(outputs.len());
    let scores: Vec<f64> = outputs.iter().map(|o| o.human_score).collect();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut chosen: Vec<usize> = if lo < hi {
        let argmin: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == lo).collect();
        let argmax: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == hi).collect();
        let min_pick = *argmin.choose(rng).expect("non-empty");
        let max_pick = *argmax.choose(rng).expect("non-empty");
        let rest: Vec<usize> = (0..scores.len()).filter(|&i| i != min_pick && i != max_pick).collect();
        let mut picked = vec![min_pick, max_pick];
        picked.extend(rest.choose_multiple(rng, size - 2));
        picked
    } else {
        log::warn!("degenerate pool for source {:?}: all human scores equal {lo}", pool.source());
        index::sample(rng, outputs.len(), size).into_vec()
    };
    chosen.shuffle(rng);

    let texts: Vec<String> = chosen.iter().map(|&i| outputs[i].candidate.clone()).collect();
    let gt: Vec<f64> = chosen.iter().map(|&i| scores[i]).collect();
    CandidateGroup::new(pool.source(), texts, Some(gt))
}
