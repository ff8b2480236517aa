//! Parsing and formatting of structured judge outputs.
//!
//! A judge response ends with two lines:
//!
//! ```text
//! Ranking: A > B = C
//! Scores: {A: 6, B: 5, C: 5}
//! ```
//!
//! Everything before the ranking line is the free-form analysis. When a
//! response contains several candidates for either line, the last one wins,
//! since the analysis may quote rankings of its own.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::types::{Judgment, Label, Preorder, ScoreMap};

/// Highest score a judge may emit.
pub const SCORE_CEILING: u8 = 10;

pub const RANKING_MARKER: &str = "Ranking:";
pub const SCORES_MARKER: &str = "Scores:";

fn is_blank(c: char) -> bool {
    c.is_whitespace()
}

/// Parses `label (('>' | '=') label)*` into tiers, best first.
pub fn parse_ranking_string(s: &str) -> Result<Preorder> {
    let mut tiers: Vec<BTreeSet<Label>> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut expect_label = true;
    let mut pending_op: Option<char> = None;

    for (pos, c) in s.char_indices() {
        if is_blank(c) {
            continue;
        }
        if expect_label {
            let label = Label::from_char(c).ok_or_else(|| Error::Syntax {
                pos,
                msg: format!("expected a label, found {c:?}"),
            })?;
            if !seen.insert(label) {
                return Err(Error::DuplicateLabel(label));
            }
            match (pending_op, tiers.last_mut()) {
                (Some('='), Some(tier)) => {
                    tier.insert(label);
                }
                _ => tiers.push(BTreeSet::from([label])),
            }
            expect_label = false;
        } else {
            match c {
                '>' | '=' => {
                    pending_op = Some(c);
                    expect_label = true;
                }
                _ => {
                    return Err(Error::Syntax { pos, msg: format!("expected '>' or '=', found {c:?}") });
                }
            }
        }
    }
    if expect_label {
        return Err(Error::Syntax { pos: s.len(), msg: "expected a label".into() });
    }
    Preorder::new(tiers)
}

/// Parses a score dictionary of the form `{A: 6, B: 5, C: 5}`.
pub fn parse_score_map(s: &str) -> Result<ScoreMap> {
    let mut p = Cursor { s, pos: 0 };
    p.skip_blank();
    p.expect('{')?;
    let mut scores = BTreeMap::new();
    loop {
        p.skip_blank();
        let pos = p.pos;
        let c = p.next().ok_or(Error::Syntax { pos, msg: "unterminated score map".into() })?;
        let label = Label::from_char(c).ok_or_else(|| Error::Syntax {
            pos,
            msg: format!("expected a label, found {c:?}"),
        })?;
        p.skip_blank();
        p.expect(':')?;
        p.skip_blank();
        let value = p.integer()?;
        if !(0..=SCORE_CEILING as i64).contains(&value) {
            return Err(Error::ScoreOutOfRange(value, SCORE_CEILING as i64));
        }
        if scores.insert(label, value as u8).is_some() {
            return Err(Error::DuplicateLabel(label));
        }
        p.skip_blank();
        let pos = p.pos;
        match p.next() {
            Some(',') => continue,
            Some('}') => break,
            Some(c) => return Err(Error::Syntax { pos, msg: format!("expected ',' or '}}', found {c:?}") }),
            None => return Err(Error::Syntax { pos, msg: "unterminated score map".into() }),
        }
    }
    p.skip_blank();
    if p.pos != s.len() {
        return Err(Error::Syntax { pos: p.pos, msg: "trailing characters after score map".into() });
    }
    Ok(scores)
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn next(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_blank(&mut self) {
        while self.peek().is_some_and(is_blank) {
            self.next();
        }
    }

    fn expect(&mut self, want: char) -> Result<()> {
        let pos = self.pos;
        match self.next() {
            Some(c) if c == want => Ok(()),
            Some(c) => Err(Error::Syntax { pos, msg: format!("expected {want:?}, found {c:?}") }),
            None => Err(Error::Syntax { pos, msg: format!("expected {want:?}, found end of input") }),
        }
    }

    fn integer(&mut self) -> Result<i64> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.next();
        }
        let digits_start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.next();
        }
        if self.pos == digits_start {
            return Err(Error::Syntax { pos: start, msg: "expected an integer score".into() });
        }
        let text = &self.s[start..self.pos];
        // Anything too long to fit is certainly out of range.
        Ok(text.parse::<i64>().unwrap_or(if text.starts_with('-') { i64::MIN } else { i64::MAX }))
    }
}

/// Groups labels by equal score, highest score first.
pub fn induced_preorder(scores: &ScoreMap) -> Result<Preorder> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_score: BTreeMap<u8, BTreeSet<Label>> = BTreeMap::new();
    for (&label, &score) in scores {
        by_score.entry(score).or_default().insert(label);
    }
    Preorder::new(by_score.into_values().rev().collect())
}

/// True iff the explicit ranking equals the ranking induced by the scores.
pub fn consistency_gate(ranking: &Preorder, scores: &ScoreMap) -> Result<bool> {
    if ranking.labels() != scores.keys().copied().collect::<BTreeSet<_>>() {
        return Err(Error::LabelSetMismatch);
    }
    Ok(*ranking == induced_preorder(scores)?)
}

/// Byte offsets and contents of each line (without the trailing newline).
fn lines_with_offsets(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').map(move |raw| {
        let start = offset;
        offset += raw.len();
        (start, raw.strip_suffix('\n').unwrap_or(raw))
    })
}

/// Parses a raw judge response into a [`Judgment`].
pub fn parse_judgment(raw: &str) -> Result<Judgment> {
    let (ranking_start, ranking) = find_ranking(raw)?;
    let scores = find_scores(raw)?;
    let prefix = &raw[..ranking_start];
    let analysis = prefix.strip_suffix('\n').unwrap_or(prefix);
    Judgment::new(analysis, ranking, scores)
}

fn find_ranking(raw: &str) -> Result<(usize, Preorder)> {
    let marked = lines_with_offsets(raw)
        .filter_map(|(start, line)| line.trim_start().strip_prefix(RANKING_MARKER).map(|rest| (start, rest)))
        .last();
    if let Some((start, rest)) = marked {
        return Ok((start, parse_ranking_string(rest)?));
    }
    lines_with_offsets(raw)
        .filter_map(|(start, line)| parse_ranking_string(line).ok().map(|r| (start, r)))
        .last()
        .ok_or(Error::MissingRanking)
}

fn find_scores(raw: &str) -> Result<ScoreMap> {
    let marked = lines_with_offsets(raw)
        .filter_map(|(_, line)| line.trim_start().strip_prefix(SCORES_MARKER))
        .last();
    if let Some(rest) = marked {
        return parse_score_map(rest);
    }
    // Fall back to the last brace literal anywhere that parses as a score map.
    let mut found = None;
    for (open, _) in raw.match_indices('{') {
        if let Some(close) = raw[open..].find('}') {
            if let Ok(map) = parse_score_map(&raw[open..=open + close]) {
                found = Some(map);
            }
        }
    }
    found.ok_or(Error::MissingScores)
}

/// Formats a score map as `{A: 6, B: 5, C: 5}`.
pub fn format_score_map(scores: &ScoreMap) -> String {
    let body: Vec<String> = scores.iter().map(|(l, s)| format!("{l}: {s}")).collect();
    format!("{{{}}}", body.join(", "))
}

/// Canonical text form of a judgment; [`parse_judgment`] inverts it exactly.
pub fn format_judgment(j: &Judgment) -> String {
    let tail = format!(
        "{RANKING_MARKER} {}\n{SCORES_MARKER} {}",
        j.ranking(),
        format_score_map(j.scores())
    );
    if j.analysis().is_empty() {
        tail
    } else {
        format!("{}\n{tail}", j.analysis())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(c: char) -> Label {
        Label::from_char(c).unwrap()
    }

    fn scores(pairs: &[(char, u8)]) -> ScoreMap {
        pairs.iter().map(|&(c, s)| (l(c), s)).collect()
    }

    fn pre(tiers: &[&[char]]) -> Preorder {
        Preorder::from_chars(tiers).unwrap()
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(parse_ranking_string("A > B = C").unwrap(), pre(&[&['A'], &['B', 'C']]));
        assert_eq!(parse_ranking_string("A").unwrap(), pre(&[&['A']]));
        assert_eq!(parse_ranking_string("A > A"), Err(Error::DuplicateLabel(l('A'))));
        assert_eq!(parse_ranking_string("\tB=A >C ").unwrap(), pre(&[&['A', 'B'], &['C']]));
    }

    #[test]
    fn ranking_syntax_errors() {
        for bad in ["", "A >", "> A", "A B", "a > b", "A >> B", "A < B", "A, B"] {
            assert!(
                matches!(parse_ranking_string(bad), Err(Error::Syntax { .. })),
                "{bad:?} should be a syntax error"
            );
        }
    }

    #[test]
    fn score_map_examples() {
        assert_eq!(parse_score_map("{A: 6, B: 5, C: 5}").unwrap(), scores(&[('A', 6), ('B', 5), ('C', 5)]));
        assert_eq!(parse_score_map("{A: 10, B: 9, C: 8}").unwrap(), scores(&[('A', 10), ('B', 9), ('C', 8)]));
        assert_eq!(parse_score_map("{A: 11}"), Err(Error::ScoreOutOfRange(11, 10)));
        assert_eq!(parse_score_map("{A: -1}"), Err(Error::ScoreOutOfRange(-1, 10)));
        assert_eq!(parse_score_map("{A: 1, A: 2}"), Err(Error::DuplicateLabel(l('A'))));
        assert_eq!(parse_score_map("{A:0,B:10}").unwrap(), scores(&[('A', 0), ('B', 10)]));
        assert!(matches!(
            parse_score_map("{A: 99999999999999999999999}"),
            Err(Error::ScoreOutOfRange(..))
        ));
    }

    #[test]
    fn score_map_syntax_errors() {
        for bad in ["", "{}", "{A 6}", "{A: }", "{A: 6,}", "{A: 6", "A: 6", "{a: 6}", "{A: 6} x", "{A: 6.5}"] {
            assert!(matches!(parse_score_map(bad), Err(Error::Syntax { .. })), "{bad:?}");
        }
    }

    #[test]
    fn induced_examples() {
        assert_eq!(
            induced_preorder(&scores(&[('A', 6), ('B', 5), ('C', 5)])).unwrap(),
            pre(&[&['A'], &['B', 'C']])
        );
        assert_eq!(induced_preorder(&scores(&[('A', 7), ('B', 7)])).unwrap(), pre(&[&['A', 'B']]));
        assert_eq!(induced_preorder(&scores(&[('A', 1), ('B', 10)])).unwrap(), pre(&[&['B'], &['A']]));
        assert_eq!(induced_preorder(&ScoreMap::new()), Err(Error::EmptyInput));
    }

    #[test]
    fn gate_examples() {
        let s = scores(&[('A', 6), ('B', 5), ('C', 5)]);
        assert_eq!(consistency_gate(&pre(&[&['A'], &['B', 'C']]), &s), Ok(true));
        assert_eq!(consistency_gate(&pre(&[&['A'], &['B'], &['C']]), &s), Ok(false));
        assert_eq!(consistency_gate(&pre(&[&['A']]), &scores(&[('B', 5)])), Err(Error::LabelSetMismatch));
    }

    #[test]
    fn parse_canonical_judgment() {
        let j = parse_judgment("…analysis…\nRanking: A > B\nScores: {A: 9, B: 7}").unwrap();
        assert_eq!(j.analysis(), "…analysis…");
        assert_eq!(*j.ranking(), pre(&[&['A'], &['B']]));
        assert_eq!(*j.scores(), scores(&[('A', 9), ('B', 7)]));
    }

    #[test]
    fn parse_judgment_missing_parts() {
        assert_eq!(parse_judgment("blah\nRanking: A > B\n"), Err(Error::MissingScores));
        assert_eq!(parse_judgment("blah\nScores: {A: 1}"), Err(Error::MissingRanking));
        assert_eq!(parse_judgment(""), Err(Error::MissingRanking));
    }

    #[test]
    fn parse_judgment_uses_last_ranking() {
        let raw = "I first thought\nRanking: B > A\nbut then\nRanking: A > B\nScores: {A: 9, B: 7}";
        let j = parse_judgment(raw).unwrap();
        assert_eq!(*j.ranking(), pre(&[&['A'], &['B']]));
        assert_eq!(j.analysis(), "I first thought\nRanking: B > A\nbut then");
    }

    #[test]
    fn parse_judgment_without_markers() {
        let raw = "Candidate A is fluent.\nA > B = C\n{A: 6, B: 5, C: 5}\n";
        let j = parse_judgment(raw).unwrap();
        assert_eq!(j.analysis(), "Candidate A is fluent.");
        assert_eq!(*j.ranking(), pre(&[&['A'], &['B', 'C']]));
    }

    #[test]
    fn parse_judgment_propagates_subparser_errors() {
        assert_eq!(
            parse_judgment("x\nRanking: A > B\nScores: {A: 12, B: 7}"),
            Err(Error::ScoreOutOfRange(12, 10))
        );
        assert_eq!(parse_judgment("x\nRanking: A > A\nScores: {A: 1}"), Err(Error::DuplicateLabel(l('A'))));
        assert_eq!(
            parse_judgment("x\nRanking: A > B\nScores: {A: 1, C: 2}"),
            Err(Error::LabelSetMismatch)
        );
    }

    #[test]
    fn format_round_trips() {
        let j = Judgment::new("a", pre(&[&['A'], &['B', 'C']]), scores(&[('A', 6), ('B', 5), ('C', 5)])).unwrap();
        let text = format_judgment(&j);
        assert_eq!(text, "a\nRanking: A > B = C\nScores: {A: 6, B: 5, C: 5}");
        assert_eq!(parse_judgment(&text).unwrap(), j);

        let empty = Judgment::new("", pre(&[&['B'], &['A']]), scores(&[('A', 1), ('B', 10)])).unwrap();
        assert_eq!(parse_judgment(&format_judgment(&empty)).unwrap(), empty);

        let newline = Judgment::new("\n", pre(&[&['A']]), scores(&[('A', 1)])).unwrap();
        assert_eq!(parse_judgment(&format_judgment(&newline)).unwrap(), newline);
    }
}
