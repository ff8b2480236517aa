use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use gqm_core::analysis::{dataset_ranking_accuracy, rerank_select, saturation_report, DatasetReport, Pooling};
use gqm_core::datagen::{build_eval_groups, task_rng};
use gqm_core::io_formats::{
    read_group_records, read_judgments, read_pools, write_curve_csv, write_group_records, GroupRecord, JudgmentRecord,
};
use gqm_core::policy_opt::{run_simulation, Provider, TrainConfig};
use gqm_core::rewards::{reward_breakdown, scale_rewards, RewardConfig, DEFAULT_RAW_MAX};
use gqm_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "gqm", version, about = "Group-relative reward evaluation and toy GRPO runs")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training config (`key = value` lines) for simulate-grpo.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Gqm,
    Sqm,
}

#[derive(Subcommand)]
enum Command {
    /// Gated rewards for each (group, judgment) pair.
    Reward {
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        /// Ground-truth differences up to this magnitude count as ties.
        #[arg(long, default_value_t = 0.0)]
        tie_epsilon: f64,
    },
    /// Dataset ranking accuracy of judgments against ground truth.
    EvalRanking {
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tie_epsilon: f64,
        /// Pool pairs across the dataset instead of averaging per group.
        #[arg(long)]
        pooled: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
    /// Mean score and ceiling-saturation rate of judgment scores.
    AnalyzeSaturation {
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long, default_value_t = 10)]
        ceiling: i64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
    /// Toy GRPO run; writes the per-step curve as CSV.
    SimulateGrpo {
        #[arg(long, value_enum, default_value_t = ProviderArg::Gqm)]
        provider: ProviderArg,
        /// Optimizer steps; overrides the config file
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Builds one evaluation group per system-output pool.
    MakeGroups {
        #[arg(long)]
        pool: PathBuf,
    },
    /// Picks the top-scored candidate of each group.
    Rerank {
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
    },
}

/// An error plus the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const EXIT_INTERNAL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_ALIGNMENT: u8 = 3;

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_INPUT, error: error.into() }
}

fn alignment(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_ALIGNMENT, error: error.into() }
}

fn internal(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_INTERNAL, error: error.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).with_context(|| format!("cannot open {}", path.display())).map_err(input)
}

fn read_with<T>(path: &Path, read: impl FnOnce(BufReader<File>) -> gqm_core::Result<T>) -> CliResult<T> {
    read(open(path)?).with_context(|| format!("reading {}", path.display())).map_err(input)
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display())).map_err(input)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Groups and judgments matched by id, in group-file order.
struct Aligned {
    pairs: Vec<(String, GroupRecord, JudgmentRecord)>,
}

fn align(groups_path: &Path, judgments_path: &Path) -> CliResult<Aligned> {
    let groups = read_with(groups_path, read_group_records)?;
    let judgments = read_with(judgments_path, read_judgments)?;

    let mut by_id: BTreeMap<String, JudgmentRecord> = BTreeMap::new();
    for j in judgments {
        if by_id.contains_key(&j.group_id) {
            return Err(alignment(anyhow!("duplicate judgment for group id {:?}", j.group_id)));
        }
        by_id.insert(j.group_id.clone(), j);
    }
    let ids: Vec<String> = groups.iter().enumerate().map(|(i, g)| g.effective_id(i)).collect();
    let unique: BTreeSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(input(anyhow!("duplicate group ids in {}", groups_path.display())));
    }
    let missing: Vec<&str> = ids.iter().filter(|id| !by_id.contains_key(*id)).map(String::as_str).collect();
    let orphans: Vec<&str> = by_id.keys().filter(|id| !unique.contains(id)).map(String::as_str).collect();
    if !missing.is_empty() || !orphans.is_empty() {
        let mut msg = String::new();
        if !missing.is_empty() {
            msg.push_str(&format!("groups without a judgment: {}", missing.join(", ")));
        }
        if !orphans.is_empty() {
            if !msg.is_empty() {
                msg.push_str("; ");
            }
            msg.push_str(&format!("judgments without a group: {}", orphans.join(", ")));
        }
        return Err(alignment(anyhow!(msg)));
    }
    let pairs = groups
        .into_iter()
        .zip(ids)
        .map(|(g, id)| {
            let j = by_id.remove(&id).expect("checked above");
            (id, g, j)
        })
        .collect();
    Ok(Aligned { pairs })
}

fn ground_truth<'a>(id: &str, g: &'a GroupRecord) -> CliResult<&'a [f64]> {
    g.group.ground_truth().ok_or_else(|| input(anyhow!("group {id:?} has no ground_truth")))
}

fn pair_error(id: &str, e: Error) -> Failure {
    alignment(anyhow!("group {id:?}: judgment does not match the group: {e}"))
}

fn reward_config(tie_epsilon: f64) -> CliResult<RewardConfig> {
    let d = RewardConfig::default();
    RewardConfig::new(tie_epsilon, d.score_ceiling, d.scale_target_max).map_err(input)
}

fn write_report(out: &mut dyn Write, report: &DatasetReport, format: ReportFormat) -> CliResult<()> {
    let text = match format {
        ReportFormat::Table => report.to_table(),
        ReportFormat::Csv => report.to_csv(),
    };
    out.write_all(text.as_bytes()).map_err(internal)
}

fn cmd_reward(cli: &Cli, groups: &Path, judgments: &Path, tie_epsilon: f64) -> CliResult<()> {
    let cfg = reward_config(tie_epsilon)?;
    let aligned = align(groups, judgments)?;
    let mut lines = Vec::with_capacity(aligned.pairs.len());
    for (id, g, j) in &aligned.pairs {
        let q = ground_truth(id, g)?;
        let b = reward_breakdown(&j.judgment, q, &cfg).map_err(|e| pair_error(id, e))?;
        let scaled = scale_rewards(&[b.r_total], DEFAULT_RAW_MAX, &cfg).map_err(internal)?[0];
        lines.push(json!({
            "group_id": id,
            "r_acc": b.r_acc,
            "r_score": b.r_score,
            "gate": b.gate,
            "r_total": b.r_total,
            "scaled": scaled,
        }));
    }
    let mut out = output(cli.output.as_deref())?;
    for line in lines {
        writeln!(out, "{line}").map_err(internal)?;
    }
    out.flush().map_err(internal)
}

fn cmd_eval_ranking(
    cli: &Cli,
    groups: &Path,
    judgments: &Path,
    tie_epsilon: f64,
    pooled: bool,
    format: ReportFormat,
) -> CliResult<()> {
    let cfg = reward_config(tie_epsilon)?;
    let aligned = align(groups, judgments)?;
    let mut pairs = Vec::with_capacity(aligned.pairs.len());
    for (id, g, j) in aligned.pairs {
        let q = ground_truth(&id, &g)?.to_vec();
        pairs.push((j.judgment, q));
    }
    if pairs.is_empty() {
        return Err(input(anyhow!("no groups to evaluate")));
    }
    let pooling = if pooled { Pooling::Pooled } else { Pooling::PerGroup };
    let report = dataset_ranking_accuracy(&pairs, &cfg, pooling).map_err(alignment)?;
    for (idx, e) in &report.errors {
        log::warn!("pair {} skipped: {e}", idx + 1);
    }
    let mut out = output(cli.output.as_deref())?;
    write_report(&mut out, &report, format)?;
    out.flush().map_err(internal)
}

fn cmd_analyze_saturation(cli: &Cli, judgments: &Path, ceiling: i64, format: ReportFormat) -> CliResult<()> {
    let records = read_with(judgments, read_judgments)?;
    let sets: Vec<Vec<i64>> =
        records.iter().map(|r| r.judgment.scores().values().map(|&s| s as i64).collect()).collect();
    let report = saturation_report(&sets, ceiling).map_err(input)?;
    let mut out = output(cli.output.as_deref())?;
    write_report(&mut out, &report, format)?;
    out.flush().map_err(internal)
}

fn cmd_simulate(cli: &Cli, provider: ProviderArg, steps: Option<usize>) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(input)?;
            TrainConfig::from_kv_str(&text).with_context(|| format!("config {}", path.display())).map_err(input)?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = steps {
        cfg.steps = steps;
    }
    cfg.validate().map_err(input)?;
    let provider = match provider {
        ProviderArg::Gqm => Provider::Gqm,
        ProviderArg::Sqm => Provider::SaturatingSqm,
    };
    let curve = run_simulation(&cfg, provider).map_err(internal)?;
    let mut out = output(cli.output.as_deref())?;
    write_curve_csv(&curve, &mut out).map_err(internal)?;
    out.flush().map_err(internal)?;
    match curve.points.last() {
        Some(p) => eprintln!(
            "provider={provider} seed={} steps={} mean_reward={} vanished_fraction={} task_quality={}",
            cfg.seed,
            curve.len(),
            p.mean_reward,
            p.vanished_fraction,
            p.task_quality
        ),
        None => eprintln!("provider={provider} seed={} steps=0", cfg.seed),
    }
    Ok(())
}

fn cmd_make_groups(cli: &Cli, pool: &Path) -> CliResult<()> {
    let pools = read_with(pool, read_pools)?;
    let seed = cli.seed.unwrap_or(0);
    let records = pools
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = task_rng(seed, i as u64);
            build_eval_groups(p, &mut rng).map(|group| GroupRecord { id: None, group })
        })
        .collect::<gqm_core::Result<Vec<_>>>()
        .map_err(input)?;
    let mut out = output(cli.output.as_deref())?;
    write_group_records(&records, &mut out).map_err(internal)?;
    out.flush().map_err(internal)
}

fn cmd_rerank(cli: &Cli, groups: &Path, judgments: &Path) -> CliResult<()> {
    let aligned = align(groups, judgments)?;
    let mut lines = Vec::with_capacity(aligned.pairs.len());
    for (id, g, j) in &aligned.pairs {
        let label = rerank_select(&g.group, &j.judgment).map_err(|e| pair_error(id, e))?;
        let text = &g.group.candidates()[label.index()].text;
        lines.push(json!({ "group_id": id, "label": label.to_string(), "text": text }));
    }
    let mut out = output(cli.output.as_deref())?;
    for line in lines {
        writeln!(out, "{line}").map_err(internal)?;
    }
    out.flush().map_err(internal)
}

fn run(cli: &Cli) -> CliResult<()> {
    if cli.config.is_some() && !matches!(cli.command, Command::SimulateGrpo { .. }) {
        return Err(input(anyhow!("--config is only used by simulate-grpo")));
    }
    match &cli.command {
        Command::Reward { groups, judgments, tie_epsilon } => cmd_reward(cli, groups, judgments, *tie_epsilon),
        Command::EvalRanking { groups, judgments, tie_epsilon, pooled, format } => {
            cmd_eval_ranking(cli, groups, judgments, *tie_epsilon, *pooled, *format)
        }
        Command::AnalyzeSaturation { judgments, ceiling, format } => {
            cmd_analyze_saturation(cli, judgments, *ceiling, *format)
        }
        Command::SimulateGrpo { provider, steps } => cmd_simulate(cli, *provider, *steps),
        Command::MakeGroups { pool } => cmd_make_groups(cli, pool),
        Command::Rerank { groups, judgments } => cmd_rerank(cli, groups, judgments),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

