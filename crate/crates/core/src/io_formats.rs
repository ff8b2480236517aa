//! JSONL codecs for groups, judgments and system-output pools, and CSV for
//! training curves.
//!
//! Writers emit keys in schema order with no insignificant whitespace, so
//! `write(read(x))` reproduces canonical input byte for byte. Every read
//! error carries the 1-based line it came from. An optional `"version": 1`
//! key is accepted on read and never written.

use std::io::{BufRead, Write};

use serde_json::{Map, Value};

use crate::datagen::{SystemOutput, SystemOutputs};
use crate::error::{Error, Result};
use crate::policy_opt::{CurvePoint, TrainCurve};
use crate::ranking_io::{parse_ranking_string, SCORE_CEILING};
use crate::types::{CandidateGroup, Judgment, Label, ScoreMap};

pub const SCHEMA_VERSION: u64 = 1;
pub const CURVE_HEADER: &str = "step,mean_reward,vanished_fraction,task_quality,objective";

/// A group plus its optional identifier. Records without an `id` are
/// identified by their 1-based position in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRecord {
    pub id: Option<String>,
    pub group: CandidateGroup,
}

impl GroupRecord {
    pub fn effective_id(&self, position: usize) -> String {
        self.id.clone().unwrap_or_else(|| (position + 1).to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentRecord {
    pub group_id: String,
    pub judgment: Judgment,
}

fn violation(line: usize, field: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::SchemaViolation { line, field: field.into(), msg: msg.into() }
}

/// Field accessor over one decoded object that tracks unknown keys.
struct Record<'a> {
    line: usize,
    obj: &'a Map<String, Value>,
}

impl<'a> Record<'a> {
    fn parse(line: usize, text: &str, allowed: &[&str]) -> Result<(Map<String, Value>, usize)> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::JsonSyntax { line, msg: e.to_string() })?;
        let Value::Object(obj) = value else {
            return Err(violation(line, "<record>", "expected a JSON object"));
        };
        for key in obj.keys() {
            if key != "version" && !allowed.contains(&key.as_str()) {
                return Err(violation(line, key.clone(), "unknown field"));
            }
        }
        if let Some(v) = obj.get("version") {
            if v.as_u64() != Some(SCHEMA_VERSION) {
                return Err(violation(line, "version", format!("unsupported version {v}")));
            }
        }
        Ok((obj, line))
    }

    fn get(&self, field: &str) -> Result<&'a Value> {
        self.obj.get(field).ok_or_else(|| violation(self.line, field, "missing"))
    }

    fn string(&self, field: &str) -> Result<&'a str> {
        self.get(field)?.as_str().ok_or_else(|| violation(self.line, field, "expected a string"))
    }

    fn opt_string(&self, field: &str) -> Result<Option<&'a str>> {
        match self.obj.get(field) {
            None => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| violation(self.line, field, "expected a string")),
        }
    }

    fn array(&self, field: &str) -> Result<&'a Vec<Value>> {
        self.get(field)?.as_array().ok_or_else(|| violation(self.line, field, "expected an array"))
    }
}

fn finite_number(v: &Value, line: usize, field: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| violation(line, field, "expected a finite number"))
}

fn object<'a>(v: &'a Value, line: usize, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| violation(line, field, "expected an object"))
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_f64(x: f64) -> String {
    serde_json::to_string(&x).expect("finite floats serialize")
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| r.as_ref().map_or(true, |(_, l)| !l.trim().is_empty()))
}

// ---- groups ----

pub fn parse_group_line(text: &str, line: usize) -> Result<GroupRecord> {
    let (obj, line) = Record::parse(line, text, &["id", "source", "candidates", "ground_truth"])?;
    let rec = Record { line, obj: &obj };
    let id = rec.opt_string("id")?.map(String::from);
    let source = rec.string("source")?;
    let mut texts = Vec::new();
    for (i, c) in rec.array("candidates")?.iter().enumerate() {
        let field = format!("candidates[{i}]");
        let c = object(c, line, &field)?;
        for key in c.keys() {
            if key != "label" && key != "text" {
                return Err(violation(line, format!("{field}.{key}"), "unknown field"));
            }
        }
        let cand = Record { line, obj: c };
        let label = cand.string("label").map_err(|_| violation(line, format!("{field}.label"), "expected a string"))?;
        if Label::from_index(i).map(|l| l.to_string()).as_deref() != Some(label) {
            return Err(violation(line, format!("{field}.label"), format!("expected consecutive labels from A, got {label:?}")));
        }
        let text = cand.string("text").map_err(|_| violation(line, format!("{field}.text"), "expected a string"))?;
        texts.push(text.to_string());
    }
    let ground_truth = match obj.get("ground_truth") {
        None => None,
        Some(v) => {
            let arr = v.as_array().ok_or_else(|| violation(line, "ground_truth", "expected an array"))?;
            Some(
                arr.iter()
                    .enumerate()
                    .map(|(i, x)| finite_number(x, line, &format!("ground_truth[{i}]")))
                    .collect::<Result<Vec<f64>>>()?,
            )
        }
    };
    let group = CandidateGroup::new(source, texts, ground_truth).map_err(|e| {
        let field = if matches!(e, Error::GroundTruthLengthMismatch { .. }) { "ground_truth" } else { "candidates" };
        violation(line, field, e.to_string())
    })?;
    Ok(GroupRecord { id, group })
}

pub fn format_group_record(record: &GroupRecord) -> String {
    let g = &record.group;
    let mut out = String::from("{");
    if let Some(id) = &record.id {
        out.push_str(&format!("\"id\":{},", json_str(id)));
    }
    out.push_str(&format!("\"source\":{},\"candidates\":[", json_str(g.source())));
    let cands: Vec<String> = g
        .candidates()
        .iter()
        .map(|c| format!("{{\"label\":{},\"text\":{}}}", json_str(&c.label.to_string()), json_str(&c.text)))
        .collect();
    out.push_str(&cands.join(","));
    out.push(']');
    if let Some(gt) = g.ground_truth() {
        let values: Vec<String> = gt.iter().map(|&x| json_f64(x)).collect();
        out.push_str(&format!(",\"ground_truth\":[{}]", values.join(",")));
    }
    out.push('}');
    out
}

pub fn read_group_records<R: BufRead>(reader: R) -> Result<Vec<GroupRecord>> {
    numbered_lines(reader).map(|r| r.and_then(|(n, l)| parse_group_line(&l, n))).collect()
}

pub fn read_groups<R: BufRead>(reader: R) -> Result<Vec<CandidateGroup>> {
    Ok(read_group_records(reader)?.into_iter().map(|r| r.group).collect())
}

pub fn write_group_records<W: Write>(records: &[GroupRecord], mut writer: W) -> Result<()> {
    for r in records {
        writeln!(writer, "{}", format_group_record(r))?;
    }
    Ok(())
}

pub fn write_groups<W: Write>(groups: &[CandidateGroup], writer: W) -> Result<()> {
    let records: Vec<GroupRecord> = groups.iter().map(|g| GroupRecord { id: None, group: g.clone() }).collect();
    write_group_records(&records, writer)
}

// ---- judgments ----

pub fn parse_judgment_line(text: &str, line: usize) -> Result<JudgmentRecord> {
    let (obj, line) = Record::parse(line, text, &["group_id", "analysis", "ranking", "scores"])?;
    let rec = Record { line, obj: &obj };
    let group_id = rec.string("group_id")?.to_string();
    let analysis = rec.string("analysis")?;
    let ranking = parse_ranking_string(rec.string("ranking")?).map_err(|e| violation(line, "ranking", e.to_string()))?;
    let mut scores = ScoreMap::new();
    for (key, v) in object(rec.get("scores")?, line, "scores")? {
        let field = format!("scores.{key}");
        let mut chars = key.chars();
        let label = match (chars.next().and_then(Label::from_char), chars.next()) {
            (Some(l), None) => l,
            _ => return Err(violation(line, field, "expected a single label letter")),
        };
        let score = v
            .as_u64()
            .filter(|&s| s <= SCORE_CEILING as u64)
            .ok_or_else(|| violation(line, &field, format!("expected an integer in [0, {SCORE_CEILING}]")))?;
        scores.insert(label, score as u8);
    }
    let judgment = Judgment::new(analysis, ranking, scores).map_err(|e| violation(line, "scores", e.to_string()))?;
    Ok(JudgmentRecord { group_id, judgment })
}

pub fn format_judgment_record(record: &JudgmentRecord) -> String {
    let j = &record.judgment;
    let scores: Vec<String> =
        j.scores().iter().map(|(l, s)| format!("{}:{s}", json_str(&l.to_string()))).collect();
    format!(
        "{{\"group_id\":{},\"analysis\":{},\"ranking\":{},\"scores\":{{{}}}}}",
        json_str(&record.group_id),
        json_str(j.analysis()),
        json_str(&j.ranking().to_string()),
        scores.join(",")
    )
}

pub fn read_judgments<R: BufRead>(reader: R) -> Result<Vec<JudgmentRecord>> {
    numbered_lines(reader).map(|r| r.and_then(|(n, l)| parse_judgment_line(&l, n))).collect()
}

pub fn write_judgments<W: Write>(records: &[JudgmentRecord], mut writer: W) -> Result<()> {
    for r in records {
        writeln!(writer, "{}", format_judgment_record(r))?;
    }
    Ok(())
}

// ---- system-output pools ----

pub fn parse_pool_line(text: &str, line: usize) -> Result<SystemOutputs> {
    let (obj, line) = Record::parse(line, text, &["source", "outputs"])?;
    let rec = Record { line, obj: &obj };
    let source = rec.string("source")?;
    let mut outputs = Vec::new();
    for (i, o) in rec.array("outputs")?.iter().enumerate() {
        let field = format!("outputs[{i}]");
        let o = object(o, line, &field)?;
        for key in o.keys() {
            if !["system_id", "candidate", "human_score"].contains(&key.as_str()) {
                return Err(violation(line, format!("{field}.{key}"), "unknown field"));
            }
        }
        let out = Record { line, obj: o };
        let sub = |name: &str| format!("{field}.{name}");
        outputs.push(SystemOutput {
            system_id: out.string("system_id").map_err(|_| violation(line, sub("system_id"), "expected a string"))?.to_string(),
            candidate: out.string("candidate").map_err(|_| violation(line, sub("candidate"), "expected a string"))?.to_string(),
            human_score: finite_number(out.get("human_score").map_err(|_| violation(line, sub("human_score"), "missing"))?, line, &sub("human_score"))?,
        });
    }
    SystemOutputs::new(source, outputs).map_err(|e| violation(line, "outputs", e.to_string()))
}

pub fn format_pool(pool: &SystemOutputs) -> String {
    let outputs: Vec<String> = pool
        .outputs()
        .iter()
        .map(|o| {
            format!(
                "{{\"system_id\":{},\"candidate\":{},\"human_score\":{}}}",
                json_str(&o.system_id),
                json_str(&o.candidate),
                json_f64(o.human_score)
            )
        })
        .collect();
    format!("{{\"source\":{},\"outputs\":[{}]}}", json_str(pool.source()), outputs.join(","))
}

pub fn read_pools<R: BufRead>(reader: R) -> Result<Vec<SystemOutputs>> {
    numbered_lines(reader).map(|r| r.and_then(|(n, l)| parse_pool_line(&l, n))).collect()
}

pub fn write_pools<W: Write>(pools: &[SystemOutputs], mut writer: W) -> Result<()> {
    for p in pools {
        writeln!(writer, "{}", format_pool(p))?;
    }
    Ok(())
}

// ---- training curves ----

/// Header plus one row per step (0-based). Floats use the shortest
/// representation that parses back to the same value.
pub fn write_curve_csv<W: Write>(curve: &TrainCurve, mut writer: W) -> Result<()> {
    writeln!(writer, "{CURVE_HEADER}")?;
    for (step, p) in curve.points.iter().enumerate() {
        writeln!(writer, "{step},{},{},{},{}", p.mean_reward, p.vanished_fraction, p.task_quality, p.objective)?;
    }
    Ok(())
}

pub fn read_curve_csv<R: BufRead>(reader: R) -> Result<TrainCurve> {
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        None => return Err(violation(1, "header", "missing header")),
        Some((_, header)) => {
            if header?.trim_end() != CURVE_HEADER {
                return Err(violation(1, "header", format!("expected {CURVE_HEADER:?}")));
            }
        }
    }
    let columns: Vec<&str> = CURVE_HEADER.split(',').collect();
    let mut points = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        let raw = raw?;
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').collect();
        if cells.len() != columns.len() {
            return Err(violation(line, "<row>", format!("expected {} columns, got {}", columns.len(), cells.len())));
        }
        let step: usize = cells[0].parse().map_err(|_| violation(line, "step", "expected an integer"))?;
        if step != points.len() {
            return Err(violation(line, "step", format!("expected step {}, got {step}", points.len())));
        }
        let mut values = [0.0; 4];
        for (k, v) in values.iter_mut().enumerate() {
            *v = cells[k + 1].parse().map_err(|_| violation(line, columns[k + 1], "expected a number"))?;
        }
        points.push(CurvePoint {
            mean_reward: values[0],
            vanished_fraction: values[1],
            task_quality: values[2],
            objective: values[3],
        });
    }
    Ok(TrainCurve { points })
}
