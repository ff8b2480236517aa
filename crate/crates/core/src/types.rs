//! Core domain types: candidate groups, tie-aware rankings, parsed judgments
//! and the per-candidate reward/advantage vectors.
//!
//! Every type validates its invariants at construction and is immutable
//! afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Smallest supported group.
pub const MIN_GROUP_SIZE: usize = 2;
/// Largest supported group (one label per uppercase ASCII letter).
pub const MAX_GROUP_SIZE: usize = 26;

/// A candidate label `A`..=`Z`, stored as its zero-based index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(u8);

impl Label {
    pub fn from_index(index: usize) -> Option<Label> {
        (index < MAX_GROUP_SIZE).then_some(Label(index as u8))
    }

    pub fn from_char(c: char) -> Option<Label> {
        c.is_ascii_uppercase().then(|| Label(c as u8 - b'A'))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_char(self) -> char {
        (b'A' + self.0) as char
    }

    /// The first `n` labels, `A, B, ...`.
    pub fn first(n: usize) -> impl Iterator<Item = Label> {
        (0..n.min(MAX_GROUP_SIZE)).map(|i| Label(i as u8))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub label: Label,
    pub text: String,
}

/// A source input together with 2..=26 labeled candidate outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGroup {
    source: String,
    candidates: Vec<Candidate>,
    ground_truth: Option<Vec<f64>>,
}

impl CandidateGroup {
    /// Builds a group, assigning labels `A, B, ...` in candidate order.
    pub fn new<S, T>(source: S, candidate_texts: Vec<T>, ground_truth: Option<Vec<f64>>) -> Result<Self>
    where
        S: Into<String>,
        T: Into<String>,
    {
        let n = candidate_texts.len();
        if !(MIN_GROUP_SIZE..=MAX_GROUP_SIZE).contains(&n) {
            return Err(Error::SizeOutOfRange(n));
        }
        if let Some(gt) = &ground_truth {
            if gt.len() != n {
                return Err(Error::GroundTruthLengthMismatch { expected: n, got: gt.len() });
            }
        }
        let candidates = candidate_texts
            .into_iter()
            .zip(Label::first(n))
            .map(|(text, label)| Candidate { label, text: text.into() })
            .collect();
        Ok(CandidateGroup { source: source.into(), candidates, ground_truth })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn ground_truth(&self) -> Option<&[f64]> {
        self.ground_truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.candidates.iter().map(|c| c.label)
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> + '_ {
        self.candidates.iter().map(|c| c.text.as_str())
    }

    /// Rebuilds the group from the candidates at `order`, relabeling from `A`.
    /// Ground truth follows its candidates.
    pub(crate) fn reindexed(&self, order: &[usize]) -> Result<Self> {
        let texts: Vec<String> = order.iter().map(|&i| self.candidates[i].text.clone()).collect();
        let gt = self.ground_truth.as_ref().map(|g| order.iter().map(|&i| g[i]).collect());
        CandidateGroup::new(self.source.clone(), texts, gt)
    }
}

/// A tie-aware total order over labels: tiers of mutually tied labels,
/// best tier first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preorder {
    tiers: Vec<BTreeSet<Label>>,
}

impl Preorder {
    pub fn new(tiers: Vec<BTreeSet<Label>>) -> Result<Self> {
        if tiers.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = BTreeSet::new();
        for tier in &tiers {
            if tier.is_empty() {
                return Err(Error::EmptyInput);
            }
            for &l in tier {
                if !seen.insert(l) {
                    return Err(Error::DuplicateLabel(l));
                }
            }
        }
        Ok(Preorder { tiers })
    }

    /// Convenience constructor from tiers of label characters, e.g. `[&['A'], &['B', 'C']]`.
    pub fn from_chars(tiers: &[&[char]]) -> Result<Self> {
        let mut out = Vec::with_capacity(tiers.len());
        for tier in tiers {
            let mut set = BTreeSet::new();
            for &c in *tier {
                let l = Label::from_char(c).ok_or(Error::Syntax { pos: 0, msg: format!("bad label {c:?}") })?;
                if !set.insert(l) {
                    return Err(Error::DuplicateLabel(l));
                }
            }
            out.push(set);
        }
        Preorder::new(out)
    }

    pub fn tiers(&self) -> &[BTreeSet<Label>] {
        &self.tiers
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.tiers.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.tiers.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }
}

impl fmt::Display for Preorder {
    /// Canonical ranking string, e.g. `A > B = C`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tier) in self.tiers.iter().enumerate() {
            if i > 0 {
                f.write_str(" > ")?;
            }
            for (j, l) in tier.iter().enumerate() {
                if j > 0 {
                    f.write_str(" = ")?;
                }
                write!(f, "{l}")?;
            }
        }
        Ok(())
    }
}

/// Map from label to predicted integer score.
pub type ScoreMap = BTreeMap<Label, u8>;

/// A parsed judge output: free-form analysis, explicit ranking and scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgment {
    analysis: String,
    ranking: Preorder,
    scores: ScoreMap,
}

impl Judgment {
    pub fn new(analysis: impl Into<String>, ranking: Preorder, scores: ScoreMap) -> Result<Self> {
        if ranking.labels() != scores.keys().copied().collect::<BTreeSet<_>>() {
            return Err(Error::LabelSetMismatch);
        }
        Ok(Judgment { analysis: analysis.into(), ranking, scores })
    }

    pub fn analysis(&self) -> &str {
        &self.analysis
    }

    pub fn ranking(&self) -> &Preorder {
        &self.ranking
    }

    pub fn scores(&self) -> &ScoreMap {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores in label order `A, B, ...`; fails unless the labels are exactly the first `n`.
    pub fn scores_in_label_order(&self) -> Result<Vec<i64>> {
        let n = self.scores.len();
        Label::first(n)
            .map(|l| self.scores.get(&l).map(|&s| s as i64).ok_or(Error::LabelSetMismatch))
            .collect()
    }
}

macro_rules! real_vector {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                $name(values)
            }

            pub fn values(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                $name(v)
            }
        }
    };
}

real_vector!(RewardVector);
real_vector!(AdvantageVector);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_group_minimal() {
        let g = CandidateGroup::new("src", vec!["t1", "t2"], None).unwrap();
        let labels: Vec<char> = g.labels().map(Label::as_char).collect();
        assert_eq!(labels, vec!['A', 'B']);
        assert_eq!(g.ground_truth(), None);
    }

    #[test]
    fn make_group_rejects_singleton_and_oversize() {
        assert_eq!(CandidateGroup::new("src", vec!["t1"], None), Err(Error::SizeOutOfRange(1)));
        let many: Vec<String> = (0..27).map(|i| i.to_string()).collect();
        assert_eq!(CandidateGroup::new("src", many, None), Err(Error::SizeOutOfRange(27)));
        let max: Vec<String> = (0..26).map(|i| i.to_string()).collect();
        let g = CandidateGroup::new("src", max, None).unwrap();
        assert_eq!(g.candidates()[25].label.as_char(), 'Z');
    }

    #[test]
    fn make_group_echoes_ground_truth() {
        let g = CandidateGroup::new("src", vec!["t1", "t2", "t3"], Some(vec![3.0, 2.0, 2.0])).unwrap();
        assert_eq!(g.ground_truth(), Some(&[3.0, 2.0, 2.0][..]));
        assert_eq!(
            CandidateGroup::new("src", vec!["t1", "t2"], Some(vec![1.0])),
            Err(Error::GroundTruthLengthMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn preorder_rejects_overlap() {
        assert_eq!(
            Preorder::from_chars(&[&['A'], &['A', 'B']]),
            Err(Error::DuplicateLabel(Label::from_char('A').unwrap()))
        );
        assert_eq!(Preorder::from_chars(&[&['A'], &[]]), Err(Error::EmptyInput));
    }

    #[test]
    fn preorder_display() {
        let p = Preorder::from_chars(&[&['A'], &['C', 'B']]).unwrap();
        assert_eq!(p.to_string(), "A > B = C");
    }

    #[test]
    fn judgment_requires_matching_labels() {
        let r = Preorder::from_chars(&[&['A']]).unwrap();
        let mut s = ScoreMap::new();
        s.insert(Label::from_char('B').unwrap(), 5);
        assert_eq!(Judgment::new("", r, s), Err(Error::LabelSetMismatch));
    }
}
