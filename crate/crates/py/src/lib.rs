//! Python bindings for `gqm_core`.

use std::collections::BTreeMap;

use gqm_core::advantage;
use gqm_core::analysis;
use gqm_core::datagen;
use gqm_core::io_formats::{format_group_record, parse_group_line, GroupRecord};
use gqm_core::policy_opt::{self, Provider, TrainConfig};
use gqm_core::ranking_io;
use gqm_core::rewards::{self, RewardConfig};
use gqm_core::types::{self, Label, ScoreMap};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: gqm_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn reward_config(tie_epsilon: f64) -> PyResult<RewardConfig> {
    let d = RewardConfig::default();
    RewardConfig::new(tie_epsilon, d.score_ceiling, d.scale_target_max).map_err(err)
}

fn label(s: &str) -> PyResult<Label> {
    let mut chars = s.chars();
    match (chars.next().and_then(Label::from_char), chars.next()) {
        (Some(l), None) => Ok(l),
        _ => Err(PyValueError::new_err(format!("invalid label {s:?}"))),
    }
}

fn tiers(p: &types::Preorder) -> Vec<Vec<String>> {
    p.tiers().iter().map(|t| t.iter().map(Label::to_string).collect()).collect()
}

/// A source with 2..=26 labeled candidates and optional ground-truth scores.
#[pyclass(name = "CandidateGroup", module = "gqm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCandidateGroup {
    inner: types::CandidateGroup,
}

#[pymethods]
impl PyCandidateGroup {
    #[new]
    #[pyo3(signature = (source, candidates, ground_truth=None))]
    fn new(source: String, candidates: Vec<String>, ground_truth: Option<Vec<f64>>) -> PyResult<Self> {
        types::CandidateGroup::new(source, candidates, ground_truth).map(|inner| Self { inner }).map_err(err)
    }

    /// Parses one JSONL group record.
    #[staticmethod]
    fn from_json(line: &str) -> PyResult<Self> {
        parse_group_line(line, 1).map(|r| Self { inner: r.group }).map_err(err)
    }

    fn to_json(&self) -> String {
        format_group_record(&GroupRecord { id: None, group: self.inner.clone() })
    }

    #[getter]
    fn source(&self) -> &str {
        self.inner.source()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().map(|l| l.to_string()).collect()
    }

    #[getter]
    fn texts(&self) -> Vec<String> {
        self.inner.texts().map(String::from).collect()
    }

    #[getter]
    fn ground_truth(&self) -> Option<Vec<f64>> {
        self.inner.ground_truth().map(<[f64]>::to_vec)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("CandidateGroup(source={:?}, candidates={:?})", self.inner.source(), self.texts())
    }
}

/// Parsed judge output: analysis text, ranking and per-label scores.
#[pyclass(name = "Judgment", module = "gqm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyJudgment {
    inner: types::Judgment,
}

#[pymethods]
impl PyJudgment {
    #[new]
    fn new(analysis: String, ranking: &str, scores: BTreeMap<String, u8>) -> PyResult<Self> {
        let ranking = ranking_io::parse_ranking_string(ranking).map_err(err)?;
        let mut map = ScoreMap::new();
        for (k, v) in scores {
            if v > ranking_io::SCORE_CEILING {
                return Err(err(gqm_core::Error::ScoreOutOfRange(v as i64, ranking_io::SCORE_CEILING as i64)));
            }
            map.insert(label(&k)?, v);
        }
        types::Judgment::new(analysis, ranking, map).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn analysis(&self) -> &str {
        self.inner.analysis()
    }

    /// Tiers from best to worst, each a sorted list of labels.
    #[getter]
    fn ranking(&self) -> Vec<Vec<String>> {
        tiers(self.inner.ranking())
    }

    #[getter]
    fn scores(&self) -> BTreeMap<String, u8> {
        self.inner.scores().iter().map(|(l, s)| (l.to_string(), *s)).collect()
    }

    /// True iff the ranking equals the order induced by the scores.
    fn gate(&self) -> PyResult<bool> {
        ranking_io::consistency_gate(self.inner.ranking(), self.inner.scores()).map_err(err)
    }

    fn format(&self) -> String {
        ranking_io::format_judgment(&self.inner)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Judgment(ranking={:?}, scores={})",
            self.inner.ranking().to_string(),
            ranking_io::format_score_map(self.inner.scores())
        )
    }
}

#[pyfunction]
fn parse_ranking_string(s: &str) -> PyResult<Vec<Vec<String>>> {
    ranking_io::parse_ranking_string(s).map(|p| tiers(&p)).map_err(err)
}

#[pyfunction]
fn parse_judgment(text: &str) -> PyResult<PyJudgment> {
    ranking_io::parse_judgment(text).map(|inner| PyJudgment { inner }).map_err(err)
}

#[pyfunction]
fn format_judgment(j: PyRef<'_, PyJudgment>) -> String {
    ranking_io::format_judgment(&j.inner)
}

#[pyfunction]
#[pyo3(signature = (q, r, tie_epsilon=0.0))]
fn ranking_accuracy(q: Vec<f64>, r: Vec<f64>, tie_epsilon: f64) -> PyResult<f64> {
    rewards::ranking_accuracy(&q, &r, tie_epsilon).map_err(err)
}

#[pyfunction]
fn score_consistency(q: Vec<f64>, r: Vec<i64>) -> PyResult<f64> {
    rewards::score_consistency(&q, &r).map_err(err)
}

#[pyfunction]
fn margin_kernel(delta: u64) -> f64 {
    rewards::margin_kernel(delta)
}

#[pyfunction]
#[pyo3(signature = (judgment, q, tie_epsilon=0.0))]
fn total_reward(judgment: PyRef<'_, PyJudgment>, q: Vec<f64>, tie_epsilon: f64) -> PyResult<f64> {
    rewards::total_reward(&judgment.inner, &q, &reward_config(tie_epsilon)?).map_err(err)
}

/// Dict with `r_acc`, `r_score`, `gate` and `r_total`.
#[pyfunction]
#[pyo3(signature = (judgment, q, tie_epsilon=0.0))]
fn reward_breakdown<'py>(
    py: Python<'py>,
    judgment: PyRef<'_, PyJudgment>,
    q: Vec<f64>,
    tie_epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let b = rewards::reward_breakdown(&judgment.inner, &q, &reward_config(tie_epsilon)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("r_acc", b.r_acc)?;
    d.set_item("r_score", b.r_score)?;
    d.set_item("gate", b.gate)?;
    d.set_item("r_total", b.r_total)?;
    Ok(d)
}

#[pyfunction]
fn sqm_kernel_reward(predicted: i64, q: f64) -> PyResult<f64> {
    rewards::sqm_kernel_reward(predicted, q, &RewardConfig::default()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (rewards, raw_max=rewards::DEFAULT_RAW_MAX))]
fn scale_rewards(rewards: Vec<f64>, raw_max: f64) -> PyResult<Vec<f64>> {
    rewards::scale_rewards(&rewards, raw_max, &RewardConfig::default()).map_err(err)
}

#[pyfunction]
fn grpo_advantage(rewards: Vec<f64>) -> PyResult<Vec<f64>> {
    advantage::grpo_advantage(&rewards).map(|a| a.into_inner()).map_err(err)
}

#[pyfunction]
fn dr_grpo_advantage(rewards: Vec<f64>) -> PyResult<Vec<f64>> {
    advantage::dr_grpo_advantage(&rewards).map(|a| a.into_inner()).map_err(err)
}

#[pyfunction]
fn group_diagnostics<'py>(py: Python<'py>, rewards: Vec<f64>, ceiling: f64) -> PyResult<Bound<'py, PyDict>> {
    let g = advantage::group_diagnostics(&rewards, ceiling);
    let d = PyDict::new(py);
    d.set_item("mean_reward", g.mean_reward)?;
    d.set_item("reward_std", g.reward_std)?;
    d.set_item("saturation_rate", g.saturation_rate)?;
    d.set_item("vanished", g.vanished)?;
    Ok(d)
}

#[pyfunction]
fn clip_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    policy_opt::clip_objective(ratio, advantage, epsilon)
}

#[pyfunction]
fn sft_term(advantage: f64, logprob: f64) -> f64 {
    policy_opt::sft_term(advantage, logprob)
}

#[pyfunction]
fn length_penalty(length: usize, max_len: usize, buffer: usize) -> PyResult<f64> {
    policy_opt::length_penalty(length, max_len, buffer).map_err(err)
}

/// Runs the toy GRPO loop and returns the curve as a dict of columns.
///
/// `config` maps training-config keys to values (as in the CLI config file).
#[pyfunction]
#[pyo3(signature = (provider="gqm", seed=None, steps=None, config=None))]
fn run_simulation<'py>(
    py: Python<'py>,
    provider: &str,
    seed: Option<u64>,
    steps: Option<usize>,
    config: Option<BTreeMap<String, String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let provider: Provider = provider.parse().map_err(err)?;
    let mut cfg = TrainConfig::default();
    for (k, v) in config.unwrap_or_default() {
        cfg.set(&k, &v).map_err(err)?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(steps) = steps {
        cfg.steps = steps;
    }
    let curve = py.detach(|| policy_opt::run_simulation(&cfg, provider)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mean_reward", curve.column(|p| p.mean_reward))?;
    d.set_item("vanished_fraction", curve.column(|p| p.vanished_fraction))?;
    d.set_item("task_quality", curve.column(|p| p.task_quality))?;
    d.set_item("objective", curve.column(|p| p.objective))?;
    Ok(d)
}

#[pyfunction]
fn moving_average(series: Vec<f64>, window: usize) -> PyResult<Vec<f64>> {
    analysis::moving_average(&series, window).map_err(err)
}

/// Monte-Carlo accuracy of uniform random integer scores in `[low, high]`.
#[pyfunction]
#[pyo3(signature = (ground_truths, low, high, trials, seed=0, tie_epsilon=0.0))]
fn random_baseline(ground_truths: Vec<Vec<f64>>, low: i64, high: i64, trials: usize, seed: u64, tie_epsilon: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    analysis::random_baseline(&ground_truths, low..=high, trials, tie_epsilon, &mut rng)
}

#[pyfunction]
fn saturation_report<'py>(py: Python<'py>, score_sets: Vec<Vec<i64>>, ceiling: i64) -> PyResult<Bound<'py, PyDict>> {
    let r = analysis::saturation_report(&score_sets, ceiling).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n_groups", r.n_groups)?;
    d.set_item("mean_score", r.mean_score)?;
    d.set_item("saturation_rate", r.saturation_rate)?;
    Ok(d)
}

#[pyfunction]
fn rerank_select(group: PyRef<'_, PyCandidateGroup>, judgment: PyRef<'_, PyJudgment>) -> PyResult<String> {
    analysis::rerank_select(&group.inner, &judgment.inner).map(|l| l.to_string()).map_err(err)
}

#[pyfunction]
fn best_of_n_select(group: PyRef<'_, PyCandidateGroup>, mean_logprobs: Vec<f64>) -> PyResult<String> {
    analysis::best_of_n_select(&group.inner, &mean_logprobs).map(|l| l.to_string()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, seed=0))]
fn sample_group_sizes(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| datagen::sample_group_size(&mut rng)).collect()
}

#[pyfunction]
#[pyo3(signature = (group, seed=0))]
fn shuffle_augment(group: PyRef<'_, PyCandidateGroup>, seed: u64) -> PyResult<PyCandidateGroup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    datagen::shuffle_augment(&group.inner, &mut rng).map(|inner| PyCandidateGroup { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (group, k, seed=0))]
fn subsample_group(group: PyRef<'_, PyCandidateGroup>, k: usize, seed: u64) -> PyResult<PyCandidateGroup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    datagen::subsample_group(&group.inner, k, &mut rng).map(|inner| PyCandidateGroup { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (group, reference, seed=0))]
fn inject_reference(group: PyRef<'_, PyCandidateGroup>, reference: &str, seed: u64) -> PyResult<PyCandidateGroup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    datagen::inject_reference(&group.inner, reference, &mut rng).map(|inner| PyCandidateGroup { inner }).map_err(err)
}

#[pymodule]
fn gqm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCandidateGroup>()?;
    m.add_class::<PyJudgment>()?;
    m.add_function(wrap_pyfunction!(parse_ranking_string, m)?)?;
    m.add_function(wrap_pyfunction!(parse_judgment, m)?)?;
    m.add_function(wrap_pyfunction!(format_judgment, m)?)?;
    m.add_function(wrap_pyfunction!(ranking_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(score_consistency, m)?)?;
    m.add_function(wrap_pyfunction!(margin_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(total_reward, m)?)?;
    m.add_function(wrap_pyfunction!(reward_breakdown, m)?)?;
    m.add_function(wrap_pyfunction!(sqm_kernel_reward, m)?)?;
    m.add_function(wrap_pyfunction!(scale_rewards, m)?)?;
    m.add_function(wrap_pyfunction!(grpo_advantage, m)?)?;
    m.add_function(wrap_pyfunction!(dr_grpo_advantage, m)?)?;
    m.add_function(wrap_pyfunction!(group_diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(clip_objective, m)?)?;
    m.add_function(wrap_pyfunction!(sft_term, m)?)?;
    m.add_function(wrap_pyfunction!(length_penalty, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(moving_average, m)?)?;
    m.add_function(wrap_pyfunction!(random_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(saturation_report, m)?)?;
    m.add_function(wrap_pyfunction!(rerank_select, m)?)?;
    m.add_function(wrap_pyfunction!(best_of_n_select, m)?)?;
    m.add_function(wrap_pyfunction!(sample_group_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(shuffle_augment, m)?)?;
    m.add_function(wrap_pyfunction!(subsample_group, m)?)?;
    m.add_function(wrap_pyfunction!(inject_reference, m)?)?;
    Ok(())
}
