//! Dataset-level evaluation: ranking accuracy, random baselines, saturation
//! reports, moving averages and candidate selection strategies.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ranking_io::consistency_gate;
use crate::rewards::{pairwise_agreement, ranking_accuracy, RewardConfig};
use crate::types::{CandidateGroup, Judgment, Label};

/// How per-pair agreements are averaged across a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Mean of per-group accuracies.
    #[default]
    PerGroup,
    /// Agreeing pairs over all pairs in the dataset.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetReport {
    pub n_groups: usize,
    /// `None` for reports built from scores alone.
    pub mean_ranking_accuracy: Option<f64>,
    pub mean_score: f64,
    pub saturation_rate: f64,
    /// Judgments whose ranking disagrees with their own scores.
    pub gate_failures: usize,
    /// Input index and error of every record that could not be evaluated.
    pub errors: Vec<(usize, Error)>,
}

const REPORT_COLUMNS: [&str; 6] =
    ["n_groups", "mean_ranking_accuracy", "mean_score", "saturation_rate", "gate_failures", "errors"];

impl DatasetReport {
    fn cells(&self) -> [String; 6] {
        [
            self.n_groups.to_string(),
            self.mean_ranking_accuracy.map(|a| a.to_string()).unwrap_or_default(),
            self.mean_score.to_string(),
            self.saturation_rate.to_string(),
            self.gate_failures.to_string(),
            self.errors.len().to_string(),
        ]
    }

    /// Header line plus one data line.
    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", REPORT_COLUMNS.join(","), self.cells().join(","))
    }

    /// Two-column `metric  value` table with aligned columns.
    pub fn to_table(&self) -> String {
        let width = REPORT_COLUMNS.iter().map(|c| c.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, value) in REPORT_COLUMNS.iter().zip(self.cells()) {
            let value = if value.is_empty() { "-".to_string() } else { value };
            let _ = writeln!(out, "{name:<width$}  {value}");
        }
        out
    }
}

fn pooled_scores<'a>(sets: impl Iterator<Item = &'a [i64]>, ceiling: i64) -> (f64, f64, usize) {
    let (mut sum, mut at_ceiling, mut n) = (0.0, 0usize, 0usize);
    for set in sets {
        for &s in set {
            sum += s as f64;
            at_ceiling += usize::from(s == ceiling);
            n += 1;
        }
    }
    if n == 0 {
        (f64::NAN, f64::NAN, 0)
    } else {
        (sum / n as f64, at_ceiling as f64 / n as f64, n)
    }
}

/// Mean ranking accuracy of judgments against ground truth.
///
/// The consistency gate is not applied; gate failures are only counted.
/// Records that fail validation are collected in `errors` and skipped.
pub fn dataset_ranking_accuracy(
    pairs: &[(Judgment, Vec<f64>)],
    cfg: &RewardConfig,
    pooling: Pooling,
) -> Result<DatasetReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut errors = Vec::new();
    let mut gate_failures = 0;
    let mut per_group = Vec::with_capacity(pairs.len());
    let mut agree_pairs = 0u64;
    let mut total_pairs = 0u64;
    let mut score_sets = Vec::with_capacity(pairs.len());

    for (idx, (judgment, q)) in pairs.iter().enumerate() {
        let evaluated = (|| -> Result<(f64, Vec<i64>, bool)> {
            if judgment.len() != q.len() {
                return Err(Error::LengthMismatch(judgment.len(), q.len()));
            }
            let r = judgment.scores_in_label_order()?;
            let r_f: Vec<f64> = r.iter().map(|&x| x as f64).collect();
            let acc = ranking_accuracy(q, &r_f, cfg.tie_epsilon)?;
            let gate = consistency_gate(judgment.ranking(), judgment.scores())?;
            Ok((acc, r, gate))
        })();
        match evaluated {
            Ok((acc, r, gate)) => {
                per_group.push(acc);
                let g = q.len();
                for i in 0..g {
                    for j in i + 1..g {
                        agree_pairs += pairwise_agreement(q[i], q[j], r[i] as f64, r[j] as f64, cfg.tie_epsilon) as u64;
                        total_pairs += 1;
                    }
                }
                gate_failures += usize::from(!gate);
                score_sets.push(r);
            }
            Err(e) => errors.push((idx, e)),
        }
    }
    if per_group.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let accuracy = match pooling {
        Pooling::PerGroup => per_group.iter().sum::<f64>() / per_group.len() as f64,
        Pooling::Pooled => agree_pairs as f64 / total_pairs as f64,
    };
    let (mean_score, saturation_rate, _) = pooled_scores(score_sets.iter().map(Vec::as_slice), cfg.score_ceiling);
    Ok(DatasetReport {
        n_groups: per_group.len(),
        mean_ranking_accuracy: Some(accuracy),
        mean_score,
        saturation_rate,
        gate_failures,
        errors,
    })
}

/// Monte-Carlo mean ranking accuracy of a scorer emitting uniform random
/// integers from `score_range`. Trial `t` scores group `t mod n`.
///
/// Returns NaN when there is nothing to evaluate (no trials, no groups or
/// an empty score range).
pub fn random_baseline<R: Rng + ?Sized>(
    ground_truths: &[Vec<f64>],
    score_range: RangeInclusive<i64>,
    trials: usize,
    tie_epsilon: f64,
    rng: &mut R,
) -> f64 {
    if trials == 0 || ground_truths.is_empty() || score_range.is_empty() {
        return f64::NAN;
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for t in 0..trials {
        let q = &ground_truths[t % ground_truths.len()];
        let r: Vec<f64> = q.iter().map(|_| rng.gen_range(score_range.clone()) as f64).collect();
        if let Ok(acc) = ranking_accuracy(q, &r, tie_epsilon) {
            total += acc;
            counted += 1;
        }
    }
    total / counted as f64
}

/// Pooled mean score and fraction of candidates scored exactly `ceiling`.
pub fn saturation_report(score_sets: &[Vec<i64>], ceiling: i64) -> Result<DatasetReport> {
    let (mean_score, saturation_rate, n) = pooled_scores(score_sets.iter().map(Vec::as_slice), ceiling);
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(DatasetReport {
        n_groups: score_sets.len(),
        mean_ranking_accuracy: None,
        mean_score,
        saturation_rate,
        gate_failures: 0,
        errors: Vec::new(),
    })
}

/// Trailing moving average; the first `window - 1` entries use partial windows.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidWindow(window));
    }
    Ok((0..series.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(window);
            let slice = &series[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Label with the highest judgment score; ties go to the earliest label.
pub fn rerank_select(group: &CandidateGroup, judgment: &Judgment) -> Result<Label> {
    if !group.labels().eq(judgment.scores().keys().copied()) {
        return Err(Error::LabelSetMismatch);
    }
    let mut best: Option<(Label, u8)> = None;
    for (&label, &score) in judgment.scores() {
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((label, score));
        }
    }
    best.map(|(l, _)| l).ok_or(Error::EmptyInput)
}

/// How token log-probabilities are collapsed into one sequence score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogprobNormalization {
    /// Mean over tokens, removing length bias.
    #[default]
    Mean,
    Sum,
}

pub fn sequence_logprob_score(token_logprobs: &[f64], normalization: LogprobNormalization) -> Result<f64> {
    if token_logprobs.is_empty() {
        return Err(Error::EmptySequence);
    }
    let sum: f64 = token_logprobs.iter().sum();
    Ok(match normalization {
        LogprobNormalization::Mean => sum / token_logprobs.len() as f64,
        LogprobNormalization::Sum => sum,
    })
}

/// Label of the candidate with the highest policy log-probability; ties
/// (and NaN) resolve to the earliest label.
pub fn best_of_n_select(group: &CandidateGroup, mean_logprobs: &[f64]) -> Result<Label> {
    if mean_logprobs.len() != group.len() {
        return Err(Error::LengthMismatch(group.len(), mean_logprobs.len()));
    }
    let mut best = 0;
    for (i, &lp) in mean_logprobs.iter().enumerate() {
        if lp > mean_logprobs[best] || mean_logprobs[best].is_nan() && !lp.is_nan() {
            best = i;
        }
    }
    Ok(group.candidates()[best].label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking_io::parse_judgment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn j(text: &str) -> Judgment {
        parse_judgment(text).unwrap()
    }

    fn group(n: usize) -> CandidateGroup {
        CandidateGroup::new("s", (0..n).map(|i| format!("c{i}")).collect(), None).unwrap()
    }

    #[test]
    fn accuracy_perfect_and_reversed() {
        let cfg = RewardConfig::default();
        let perfect = vec![(j("Ranking: B > A\nScores: {A: 3, B: 8}"), vec![1.0, 2.0])];
        let r = dataset_ranking_accuracy(&perfect, &cfg, Pooling::PerGroup).unwrap();
        assert_eq!(r.mean_ranking_accuracy, Some(1.0));
        assert_eq!(r.gate_failures, 0);
        let reversed = vec![(j("Ranking: A > B\nScores: {A: 8, B: 3}"), vec![1.0, 2.0])];
        let r = dataset_ranking_accuracy(&reversed, &cfg, Pooling::PerGroup).unwrap();
        assert_eq!(r.mean_ranking_accuracy, Some(0.0));
    }

    #[test]
    fn accuracy_counts_gate_failures_without_gating() {
        let cfg = RewardConfig::default();
        let pairs = vec![(j("Ranking: A > B\nScores: {A: 3, B: 8}"), vec![1.0, 2.0])];
        let r = dataset_ranking_accuracy(&pairs, &cfg, Pooling::PerGroup).unwrap();
        assert_eq!(r.mean_ranking_accuracy, Some(1.0));
        assert_eq!(r.gate_failures, 1);
    }

    #[test]
    fn accuracy_collects_errors_and_pools() {
        let cfg = RewardConfig::default();
        let pairs = vec![
            (j("Ranking: B > A\nScores: {A: 3, B: 8}"), vec![1.0, 2.0]),
            (j("Ranking: A > B\nScores: {A: 3, B: 8}"), vec![1.0, 2.0, 3.0]),
            (j("Ranking: A > B > C\nScores: {A: 9, B: 8, C: 7}"), vec![1.0, 2.0, 3.0]),
        ];
        let r = dataset_ranking_accuracy(&pairs, &cfg, Pooling::PerGroup).unwrap();
        assert_eq!(r.n_groups, 2);
        assert_eq!(r.errors, vec![(1, Error::LengthMismatch(2, 3))]);
        assert_eq!(r.mean_ranking_accuracy, Some(0.5));
        let pooled = dataset_ranking_accuracy(&pairs, &cfg, Pooling::Pooled).unwrap();
        assert_eq!(pooled.mean_ranking_accuracy, Some(0.25));
        assert_eq!(dataset_ranking_accuracy(&[], &cfg, Pooling::PerGroup), Err(Error::EmptyDataset));
    }

    #[test]
    fn random_baseline_degenerate_range() {
        let gts = vec![vec![1.0, 1.0, 2.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let acc = random_baseline(&gts, 5..=5, 100, 0.0, &mut rng);
        assert!((acc - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_baseline_is_seeded() {
        let gts = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let a = random_baseline(&gts, 0..=10, 1000, 0.0, &mut ChaCha8Rng::seed_from_u64(4));
        let b = random_baseline(&gts, 0..=10, 1000, 0.0, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn saturation_examples() {
        let r = saturation_report(&[vec![10, 10], vec![5, 10]], 10).unwrap();
        assert_eq!(r.saturation_rate, 0.75);
        assert_eq!(r.mean_score, 8.75);
        assert_eq!(r.n_groups, 2);
        assert_eq!(saturation_report(&[vec![10, 10]], 10).unwrap().saturation_rate, 1.0);
        assert_eq!(saturation_report(&[vec![1, 2]], 10).unwrap().saturation_rate, 0.0);
        assert_eq!(saturation_report(&[], 10), Err(Error::EmptyDataset));
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average(&[0.0, 1.0, 2.0, 3.0], 2).unwrap(), vec![0.0, 0.5, 1.5, 2.5]);
        assert_eq!(moving_average(&[3.0, 1.0], 1).unwrap(), vec![3.0, 1.0]);
        assert_eq!(moving_average(&[2.0; 5], 3).unwrap(), vec![2.0; 5]);
        assert_eq!(moving_average(&[1.0], 0), Err(Error::InvalidWindow(0)));
        assert!(moving_average(&[], 3).unwrap().is_empty());
    }

    #[test]
    fn rerank_examples() {
        let g = group(2);
        assert_eq!(rerank_select(&g, &j("Ranking: A > B\nScores: {A: 9, B: 7}")).unwrap().as_char(), 'A');
        assert_eq!(rerank_select(&g, &j("Ranking: A = B\nScores: {A: 7, B: 7}")).unwrap().as_char(), 'A');
        assert_eq!(rerank_select(&g, &j("Ranking: B > A\nScores: {A: 1, B: 10}")).unwrap().as_char(), 'B');
        assert_eq!(rerank_select(&group(3), &j("Ranking: A > B\nScores: {A: 9, B: 7}")), Err(Error::LabelSetMismatch));
    }

    #[test]
    fn best_of_n_examples() {
        let g = group(2);
        assert_eq!(best_of_n_select(&g, &[-1.0, -2.0]).unwrap().as_char(), 'A');
        assert_eq!(best_of_n_select(&g, &[-1.0, -1.0]).unwrap().as_char(), 'A');
        assert_eq!(best_of_n_select(&g, &[f64::NAN, -3.0]).unwrap().as_char(), 'B');
        assert_eq!(best_of_n_select(&g, &[-1.0]), Err(Error::LengthMismatch(2, 1)));
    }

    #[test]
    fn logprob_normalization() {
        assert_eq!(sequence_logprob_score(&[-1.0, -3.0], LogprobNormalization::Mean).unwrap(), -2.0);
        assert_eq!(sequence_logprob_score(&[-1.0, -3.0], LogprobNormalization::Sum).unwrap(), -4.0);
        assert_eq!(sequence_logprob_score(&[], LogprobNormalization::Mean), Err(Error::EmptySequence));
    }

    #[test]
    fn report_rendering() {
        let r = saturation_report(&[vec![10, 5]], 10).unwrap();
        assert_eq!(r.to_csv(), "n_groups,mean_ranking_accuracy,mean_score,saturation_rate,gate_failures,errors\n1,,7.5,0.5,0,0\n");
        let table = r.to_table();
        assert!(table.contains("mean_ranking_accuracy  -"));
        assert!(table.lines().all(|l| l.find("  ").is_some()));
    }
}
