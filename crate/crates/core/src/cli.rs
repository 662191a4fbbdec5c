//! Command-line front end: data generation, evaluation runs, reports, an
//! interactive player and the mock completion server.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eval::{
    aggregate, curve_csv, micro_macro_table, pearson_table, per_task_table, run_evaluation,
    summary_table, EpisodeConfig, EpisodeResult, Outcome, RunReport, Session, SessionOptions,
};
use crate::planner::{
    export_training_file, plan_all, sample_trainsets, TrainSetName, PER_TASK_CAP,
};
use crate::policy::{scripted_responder, CompletionConfig, MockServer, PolicyFactory, PolicySpec};
use crate::tasks::{Catalog, FailConvention, Split, TaskVariation};
use crate::transcript::{render, HistoryMode, TokenBudget};
use crate::world::messages::{fill, messages};

#[derive(Debug, Parser)]
#[command(
    name = "textlab",
    version,
    about = "Science text-game simulator and agent evaluation harness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List task classes with pool sizes and split counts.
    Tasks(TasksArgs),
    /// Generate variations, gold paths and training sets.
    Gen(GenArgs),
    /// Run an evaluation and store it under the output directory.
    Eval(EvalArgs),
    /// Play a variation in the terminal.
    Play(PlayArgs),
    /// Compare stored runs.
    Report(ReportArgs),
    /// Serve the canned completion endpoint.
    MockServer(MockArgs),
}

#[derive(Debug, Args)]
pub struct TasksArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data-out")]
    pub out: PathBuf,
    /// Comma-separated task ids (default: all).
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<String>,
    /// Variation count override, as TASK=N. Repeatable.
    #[arg(long = "count", value_parser = parse_count)]
    pub counts: Vec<(String, usize)>,
    #[arg(long, default_value_t = TokenBudget::DEFAULT_MAX)]
    pub budget: usize,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    /// TOML run config, or a stored run manifest (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// oracle, random, replay:PATH or completion:URL
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long, value_delimiter = ',')]
    pub tasks: Option<Vec<String>>,
    /// Master seed for task data.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run seeds; one full pass over the split per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub convention: Option<FailConvention>,
    /// on or off
    #[arg(long, value_parser = parse_switch)]
    pub preconditions: Option<bool>,
    #[arg(long)]
    pub mode: Option<HistoryMode>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub log_prompts: bool,
    /// Score the improvement column is relative to.
    #[arg(long)]
    pub baseline: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    /// Variation id, e.g. melting-0.
    #[arg(long)]
    pub variation: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub show_score: bool,
    #[arg(long, value_parser = parse_switch, default_value = "off")]
    pub preconditions: bool,
    /// Write the session transcript here on exit.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub baseline: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MockArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

fn parse_count(s: &str) -> Result<(String, usize), String> {
    let (task, n) = s
        .split_once('=')
        .ok_or_else(|| format!("expected TASK=N, got {s}"))?;
    let n = n.parse().map_err(|_| format!("bad count in {s}"))?;
    Ok((task.to_string(), n))
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        other => Err(format!("expected on or off, got {other}")),
    }
}

/// Everything that determines an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub policy: String,
    pub split: Split,
    /// Empty means every task.
    pub tasks: Vec<String>,
    pub counts: BTreeMap<String, usize>,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub limit: usize,
    pub convention: FailConvention,
    pub preconditions: bool,
    pub intercepts_consume_steps: bool,
    pub clear_on_leave: bool,
    pub mode: HistoryMode,
    pub budget: usize,
    pub label: Option<String>,
    pub log_prompts: bool,
    pub baseline: Option<f64>,
    pub completion: CompletionConfig,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            policy: "oracle".into(),
            split: Split::Test,
            tasks: Vec::new(),
            counts: BTreeMap::new(),
            seed: 0,
            seeds: vec![0],
            limit: crate::eval::DEFAULT_LIMIT,
            convention: FailConvention::ZeroOnFail,
            preconditions: false,
            intercepts_consume_steps: false,
            clear_on_leave: false,
            mode: HistoryMode::FullHistory,
            budget: TokenBudget::DEFAULT_MAX,
            label: None,
            log_prompts: false,
            baseline: None,
            completion: CompletionConfig::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            out: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: RunManifest = serde_json::from_str(&text)
                .with_context(|| format!("parsing manifest {}", path.display()))?;
            return Ok(manifest.config);
        }
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Applies command-line flags over the file values.
    pub fn merge(&mut self, args: &EvalArgs) {
        if let Some(v) = &args.policy {
            self.policy = v.clone();
        }
        if let Some(v) = args.split {
            self.split = v;
        }
        if let Some(v) = &args.tasks {
            self.tasks = v.clone();
        }
        if let Some(v) = args.seed {
            self.seed = v;
        }
        if let Some(v) = &args.seeds {
            self.seeds = v.clone();
        }
        if let Some(v) = args.limit {
            self.limit = v;
        }
        if let Some(v) = args.convention {
            self.convention = v;
        }
        if let Some(v) = args.preconditions {
            self.preconditions = v;
        }
        if let Some(v) = args.mode {
            self.mode = v;
        }
        if let Some(v) = args.budget {
            self.budget = v;
        }
        if let Some(v) = args.workers {
            self.workers = v;
        }
        if let Some(v) = &args.out {
            self.out = v.clone();
        }
        if let Some(v) = &args.label {
            self.label = Some(v.clone());
        }
        if args.log_prompts {
            self.log_prompts = true;
        }
        if let Some(v) = args.baseline {
            self.baseline = Some(v);
        }
    }

    pub fn validate(&self, catalog: &Catalog) -> anyhow::Result<PolicySpec> {
        let spec: PolicySpec = self.policy.parse().map_err(anyhow::Error::msg)?;
        if self.limit == 0 {
            bail!("step limit must be positive");
        }
        if self.budget == 0 {
            bail!("budget must be positive");
        }
        if self.seeds.is_empty() {
            bail!("at least one run seed is needed");
        }
        if self.workers == 0 {
            bail!("workers must be positive");
        }
        for task in self.tasks.iter().chain(self.counts.keys()) {
            catalog.class(task)?;
        }
        Ok(spec)
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            limit: self.limit,
            budget: self.budget,
            mode: self.mode,
            session: SessionOptions {
                guard: self.preconditions,
                clear_on_leave: self.clear_on_leave,
                intercepts_consume_steps: self.intercepts_consume_steps,
                convention: self.convention,
            },
            log_prompts: self.log_prompts,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.policy.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        RunManifest {
            tool: "textlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
        }
    }

    /// Content hash used as the run directory name.
    pub fn run_id(&self) -> String {
        let json = serde_json::to_vec(self).expect("manifest serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

fn select(
    catalog: &Catalog,
    seed: u64,
    counts: &BTreeMap<String, usize>,
    tasks: &[String],
) -> anyhow::Result<Vec<TaskVariation>> {
    let all = catalog.generate(seed, counts)?;
    Ok(all
        .into_iter()
        .filter(|v| tasks.is_empty() || tasks.contains(&v.task))
        .collect())
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> anyhow::Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_tasks(args: &TasksArgs) -> anyhow::Result<()> {
    let catalog = Catalog::builtin();
    let variations = catalog.generate(args.seed, &BTreeMap::new())?;
    let table = Catalog::split_table(&variations);
    println!(
        "{:<24} {:<15} {:>5} {:>5} {:>6} {:>5} {:>4} {:>5}",
        "task", "category", "train", "eval", "count", "train", "dev", "test"
    );
    println!(
        "{:<24} {:<15} {:>5} {:>5} {:>6} {:>5} {:>4} {:>5}",
        "", "", "pool", "pool", "", "", "", ""
    );
    for class in &catalog.classes {
        let (train_pool, eval_pool) = class.pool_sizes();
        let counts = table.tasks.get(&class.id).copied().unwrap_or_default();
        println!(
            "{:<24} {:<15} {:>5} {:>5} {:>6} {:>5} {:>4} {:>5}",
            class.id,
            format!("{:?}", class.category).to_lowercase(),
            train_pool,
            eval_pool,
            class.default_count,
            counts.train,
            counts.dev,
            counts.test
        );
    }
    println!("total variations: {}", variations.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct InventoryLine<'a> {
    id: &'a str,
    task: &'a str,
    split: Split,
    seed: u64,
    description: &'a str,
    params: &'a crate::tasks::Params,
}

#[derive(Debug, Serialize)]
struct GoldLine<'a> {
    variation: &'a str,
    task: &'a str,
    path: usize,
    actions: &'a [String],
    text: String,
}

#[derive(Debug, Serialize)]
struct GenManifest {
    seed: u64,
    budget: usize,
    tasks: BTreeMap<String, crate::tasks::SplitCounts>,
    variations: usize,
    gold_paths: usize,
    trainsets: BTreeMap<String, usize>,
    subset_chain: bool,
    per_task_cap: usize,
}

pub fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let catalog = Catalog::builtin();
    let counts: BTreeMap<String, usize> = args.counts.iter().cloned().collect();
    for task in args.tasks.iter().chain(counts.keys()) {
        catalog.class(task)?;
    }
    if args.out.exists() && fs::read_dir(&args.out)?.next().is_some() && !args.force {
        bail!(
            "{} is not empty; pass --force to write into it",
            args.out.display()
        );
    }
    let variations = select(catalog, args.seed, &counts, &args.tasks)?;
    let plans = plan_all(&variations)?;
    fs::create_dir_all(args.out.join("gold"))?;
    fs::create_dir_all(args.out.join("trainsets"))?;

    write_file(
        &args.out.join("inventory.jsonl"),
        jsonl(variations.iter().map(|v| InventoryLine {
            id: &v.id,
            task: &v.task,
            split: v.split,
            seed: v.seed,
            description: &v.description,
            params: &v.params,
        }))?,
    )?;
    let mut by_task: BTreeMap<&str, Vec<GoldLine>> = BTreeMap::new();
    for paths in &plans {
        for (i, p) in paths.iter().enumerate() {
            by_task.entry(p.task.as_str()).or_default().push(GoldLine {
                variation: &p.variation,
                task: &p.task,
                path: i,
                actions: &p.actions,
                text: render(&p.transcript),
            });
        }
    }
    for (task, lines) in &by_task {
        write_file(
            &args.out.join("gold").join(format!("{task}.jsonl")),
            jsonl(lines)?,
        )?;
    }

    let train: Vec<_> = variations
        .iter()
        .zip(&plans)
        .filter(|(v, _)| v.split == Split::Train)
        .map(|(_, p)| p.clone())
        .collect();
    let sets = sample_trainsets(&train, args.seed);
    let budget = TokenBudget::new(args.budget);
    let mut sizes = BTreeMap::new();
    for set in &sets {
        let path = args
            .out
            .join("trainsets")
            .join(format!("{}.jsonl", set.name.name()));
        if set.gameplays.is_empty() {
            continue;
        }
        export_training_file(set, &budget, &path)?;
        sizes.insert(set.name.name().to_string(), set.gameplays.len());
    }
    let [all, one, capped] = &sets;
    let subset_chain = one.gameplays.iter().all(|g| all.gameplays.contains(g))
        && capped.gameplays.iter().all(|g| one.gameplays.contains(g));
    let manifest = GenManifest {
        seed: args.seed,
        budget: args.budget,
        tasks: Catalog::split_table(&variations).tasks,
        variations: variations.len(),
        gold_paths: plans.iter().map(Vec::len).sum(),
        trainsets: sizes,
        subset_chain,
        per_task_cap: PER_TASK_CAP,
    };
    write_file(
        &args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;

    println!("variations: {}", manifest.variations);
    println!("gold paths: {}", manifest.gold_paths);
    for name in TrainSetName::ALL {
        println!(
            "{:<14} {}",
            name.name(),
            manifest.trainsets.get(name.name()).copied().unwrap_or(0)
        );
    }
    println!(
        "subset chain: {}",
        if subset_chain { "ok" } else { "BROKEN" }
    );
    Ok(())
}

/// Runs an evaluation and returns the run directory.
pub fn cmd_eval(args: &EvalArgs) -> anyhow::Result<PathBuf> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.merge(args);
    let catalog = Catalog::builtin();
    let spec = config.validate(catalog)?;
    let variations: Vec<TaskVariation> =
        select(catalog, config.seed, &config.counts, &config.tasks)?
            .into_iter()
            .filter(|v| v.split == config.split)
            .collect();
    if variations.is_empty() {
        bail!("no variations selected");
    }
    let manifest = RunManifest::new(&config);
    let dir = config.out.join(manifest.run_id());
    if dir.exists() {
        return Err(crate::Error::RunExists(dir).into());
    }
    let factory = PolicyFactory::new(&spec, &config.completion)?;
    let episode = config.episode_config();
    let results = run_evaluation(
        &variations,
        &factory,
        &config.seeds,
        &episode,
        config.workers,
    )?;
    let checkpoints: Vec<usize> = (0..=config.limit).collect();
    let report = aggregate(&config.label(), &results, &checkpoints)?;

    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    write_file(&dir.join("transcripts.jsonl"), jsonl(&results)?)?;
    write_file(
        &dir.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    write_file(
        &dir.join("report.txt"),
        report_text(&[&report], config.baseline),
    )?;
    write_file(&dir.join("curves.csv"), curve_csv(&report))?;

    print!("{}", summary_table(&[&report], config.baseline));
    println!("run: {}", dir.display());
    if report.aborted > 0 {
        eprintln!("{} of {} episodes aborted", report.aborted, report.episodes);
        for r in results
            .iter()
            .filter(|r| r.outcome == Outcome::Aborted)
            .take(3)
        {
            eprintln!(
                "  {}: {}",
                r.variation,
                r.error.as_deref().unwrap_or("unknown error")
            );
        }
    }
    if report.aborted == report.episodes {
        bail!("every episode aborted");
    }
    Ok(dir)
}

fn report_text(reports: &[&RunReport], baseline: Option<f64>) -> String {
    let mut out = summary_table(reports, baseline);
    out.push('\n');
    out.push_str(&per_task_table(reports));
    out.push('\n');
    out.push_str(&micro_macro_table(reports));
    if reports.len() > 1 {
        out.push('\n');
        out.push_str(&pearson_table(reports));
    }
    out
}

pub fn load_run(dir: &Path) -> anyhow::Result<(RunManifest, RunReport)> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
    };
    let manifest = serde_json::from_str(&read("manifest.json")?)?;
    let report = serde_json::from_str(&read("report.json")?)?;
    Ok((manifest, report))
}

pub fn load_results(dir: &Path) -> anyhow::Result<Vec<EpisodeResult>> {
    let path = dir.join("transcripts.jsonl");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(anyhow::Error::from))
        .collect()
}

pub fn cmd_report(args: &ReportArgs) -> anyhow::Result<String> {
    let mut reports = Vec::new();
    for dir in &args.runs {
        let (_, report) = load_run(dir)?;
        reports.push(report);
    }
    let refs: Vec<&RunReport> = reports.iter().collect();
    Ok(report_text(&refs, args.baseline))
}

/// Interactive loop over `input`; returns the finished session.
pub fn play<R: BufRead, W: Write>(
    variation: &TaskVariation,
    args: &PlayArgs,
    input: R,
    mut out: W,
) -> anyhow::Result<Session> {
    let mut session = Session::new(
        variation,
        SessionOptions {
            guard: args.preconditions,
            ..SessionOptions::default()
        },
    );
    writeln!(out, "{}", variation.description)?;
    writeln!(out, "> {}", crate::eval::RESET_ACTION)?;
    writeln!(out, "{}", session.opening())?;
    let m = messages();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = session.act(&line);
        writeln!(out, "{}", record.observation)?;
        if args.show_score {
            writeln!(out, "[score {}]", record.score_after)?;
        }
        if session.finished() {
            let template = if session.won() { &m.won } else { &m.lost };
            writeln!(
                out,
                "{}",
                fill(template, &[("score", &session.score().to_string())])
            )?;
            break;
        }
    }
    if let Some(path) = &args.transcript {
        write_file(path, render(session.transcript()))?;
    }
    Ok(session)
}

pub fn cmd_play(args: &PlayArgs) -> anyhow::Result<()> {
    let variations = Catalog::builtin().generate(args.seed, &BTreeMap::new())?;
    let variation = variations
        .iter()
        .find(|v| v.id == args.variation)
        .ok_or_else(|| crate::Error::UnknownVariation(args.variation.clone()))?;
    let stdin = io::stdin();
    play(variation, args, stdin.lock(), io::stdout().lock())?;
    Ok(())
}

pub fn cmd_mock_server(args: &MockArgs) -> anyhow::Result<()> {
    let server = MockServer::start(&args.addr, scripted_responder(), 0)?;
    println!("serving completions at {}", server.url());
    server.join();
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Tasks(a) => cmd_tasks(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Play(a) => cmd_play(a),
        Command::Report(a) => cmd_report(a).map(|text| print!("{text}")),
        Command::MockServer(a) => cmd_mock_server(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
