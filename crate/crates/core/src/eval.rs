//! Episode runner, action classification and run aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::category::ActionCategory;
use crate::error::{Error, Result};
use crate::guard::{Decision, OpenStateLedger};
use crate::policy::{Policy, PolicyContext, PolicyFactory};
use crate::tasks::{FailConvention, ScoreTracker, Split, TaskVariation};
use crate::transcript::{
    pack_transcript, DialogTurn, HistoryMode, TokenBudget, Transcript, TurnAnnotation, ACTION_CUE,
};
use crate::world::messages::{fill, messages};
use crate::world::{
    idle_tick, outcome_of, parse_action, render_look, step, ParseResult, StepOutcome, WorldState,
};

/// Command shown as the first turn of every episode.
pub const RESET_ACTION: &str = "look around";

pub const DEFAULT_LIMIT: usize = 100;

/// Category of `raw` in `state` without changing anything. With a ledger,
/// actions the guard would swallow are RA when the engine agrees and
/// Other when it does not.
pub fn classify(raw: &str, state: &WorldState, ledger: Option<&OpenStateLedger>) -> ActionCategory {
    let parsed = parse_action(raw, state);
    if let Some(ledger) = ledger {
        if let Decision::Intercept(_) = ledger.filter(raw) {
            return match parsed {
                ParseResult::Parsed(action)
                    if outcome_of(state, &action) == StepOutcome::Redundant =>
                {
                    ActionCategory::Redundant
                }
                _ => ActionCategory::Other,
            };
        }
    }
    match parsed {
        ParseResult::Parsed(action) => category_of(outcome_of(state, &action)),
        ParseResult::UnresolvedObject(_) => ActionCategory::InvalidObject,
        ParseResult::Ambiguous(_) => ActionCategory::Other,
        ParseResult::SyntaxError => ActionCategory::InvalidSyntax,
    }
}

fn category_of(outcome: StepOutcome) -> ActionCategory {
    match outcome {
        StepOutcome::Executed => ActionCategory::Valid,
        StepOutcome::AffordanceViolation => ActionCategory::AffordanceViolation,
        StepOutcome::Redundant => ActionCategory::Redundant,
    }
}

/// Sends `raw` to the engine: one tick whether or not it parses.
pub fn execute(world: &mut WorldState, raw: &str) -> (ActionCategory, String) {
    let m = messages();
    match parse_action(raw, world) {
        ParseResult::Parsed(action) => {
            let result = step(world, &action);
            (category_of(result.outcome), result.observation)
        }
        ParseResult::UnresolvedObject(phrase) => {
            idle_tick(world);
            (
                ActionCategory::InvalidObject,
                fill(&m.unknown_object, &[("phrase", &phrase)]),
            )
        }
        ParseResult::Ambiguous(phrase) => {
            idle_tick(world);
            (
                ActionCategory::Other,
                fill(&m.ambiguous_object, &[("phrase", &phrase)]),
            )
        }
        ParseResult::SyntaxError => {
            idle_tick(world);
            (ActionCategory::InvalidSyntax, m.unknown_command.clone())
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub action: String,
    pub category: Option<ActionCategory>,
    pub intercepted: bool,
    pub env_step_consumed: bool,
    /// Environment steps consumed up to and including this action.
    pub env_step: usize,
    pub score_after: u32,
    pub observation: String,
    /// Prior turns visible in the prompt that produced this action.
    pub prompt_turns: usize,
    pub prompt_pieces: usize,
    pub prompt_ends_with_cue: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_completion: Option<String>,
    pub latency_ms: u64,
}

impl ActionRecord {
    pub fn category(&self) -> ActionCategory {
        self.category.unwrap_or(ActionCategory::Other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionOptions {
    pub guard: bool,
    pub clear_on_leave: bool,
    pub intercepts_consume_steps: bool,
    pub convention: FailConvention,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            guard: false,
            clear_on_leave: false,
            intercepts_consume_steps: false,
            convention: FailConvention::ZeroOnFail,
        }
    }
}

/// One game in progress: world, score, optional guard and transcript.
#[derive(Debug, Clone)]
pub struct Session {
    variation: TaskVariation,
    world: WorldState,
    tracker: ScoreTracker,
    ledger: Option<OpenStateLedger>,
    transcript: Transcript,
    records: Vec<ActionRecord>,
    env_steps: usize,
    options: SessionOptions,
}

impl Session {
    /// Starts the game with the reset turn, which is not an environment step.
    pub fn new(variation: &TaskVariation, options: SessionOptions) -> Self {
        let world = variation.initial_world.clone();
        let mut tracker = ScoreTracker::new(&variation.scoring);
        tracker.observe(&variation.scoring, &world);
        let observation = render_look(&world);
        let mut ledger = options
            .guard
            .then(|| OpenStateLedger::new().with_clear_on_leave(options.clear_on_leave));
        if let Some(l) = ledger.as_mut() {
            l.observe(Some(RESET_ACTION), &observation);
        }
        let mut transcript = Transcript::new(variation.description.clone());
        transcript.push(
            DialogTurn {
                action: RESET_ACTION.to_string(),
                observation,
            },
            TurnAnnotation::default(),
        );
        Session {
            variation: variation.clone(),
            world,
            tracker,
            ledger,
            transcript,
            records: Vec::new(),
            env_steps: 0,
            options,
        }
    }

    pub fn variation(&self) -> &TaskVariation {
        &self.variation
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn records(&self) -> &[ActionRecord] {
        &self.records
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn score(&self) -> u32 {
        self.tracker.score(self.options.convention)
    }

    pub fn won(&self) -> bool {
        self.tracker.won()
    }

    pub fn failed(&self) -> bool {
        self.tracker.failed()
    }

    pub fn finished(&self) -> bool {
        self.tracker.finished()
    }

    pub fn score_under(&self, convention: FailConvention) -> u32 {
        self.tracker.score(convention)
    }

    /// Observation of the reset turn.
    pub fn opening(&self) -> &str {
        &self.transcript.turns()[0].observation
    }

    /// Plays one emitted action. Only the first line counts. An empty action
    /// costs a step as invalid syntax but adds no dialog turn.
    pub fn act(&mut self, raw: &str) -> &ActionRecord {
        let text = crate::policy::first_line(raw).to_string();
        let intercepted = match (&mut self.ledger, text.is_empty()) {
            (Some(ledger), false) => match ledger.intercept(&text) {
                Decision::Intercept(reply) => Some(reply),
                Decision::PassThrough => None,
            },
            _ => None,
        };
        let was_intercepted = intercepted.is_some();
        let (category, observation, consumed) = match intercepted {
            Some(reply) => {
                let category = match parse_action(&text, &self.world) {
                    ParseResult::Parsed(a)
                        if outcome_of(&self.world, &a) == StepOutcome::Redundant =>
                    {
                        ActionCategory::Redundant
                    }
                    _ => ActionCategory::Other,
                };
                (category, reply, self.options.intercepts_consume_steps)
            }
            None if text.is_empty() => {
                idle_tick(&mut self.world);
                (
                    ActionCategory::InvalidSyntax,
                    messages().unknown_command.clone(),
                    true,
                )
            }
            None => {
                let (category, observation) = execute(&mut self.world, &text);
                (category, observation, true)
            }
        };
        if consumed {
            self.env_steps += 1;
        }
        self.tracker.observe(&self.variation.scoring, &self.world);
        if let Some(ledger) = self.ledger.as_mut() {
            ledger.observe(Some(&text), &observation);
        }
        let score_after = self.score();
        if !text.is_empty() {
            self.transcript.push(
                DialogTurn {
                    action: text.clone(),
                    observation: observation.clone(),
                },
                TurnAnnotation {
                    score: score_after,
                    category: Some(category),
                    intercepted: was_intercepted,
                },
            );
        }
        self.records.push(ActionRecord {
            action: text,
            category: Some(category),
            intercepted: was_intercepted,
            env_step_consumed: consumed,
            env_step: self.env_steps,
            score_after,
            observation,
            ..ActionRecord::default()
        });
        self.records.last().expect("just pushed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Won,
    Lost,
    LimitReached,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub variation: String,
    pub task: String,
    pub split: Split,
    pub seed: u64,
    pub outcome: Outcome,
    /// Final score under the run's convention.
    pub score: u32,
    pub score_zero_on_fail: u32,
    pub score_last_on_fail: u32,
    pub env_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Emitted actions in order, so a stored run can be replayed.
    pub actions: Vec<String>,
    pub records: Vec<ActionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub limit: usize,
    pub budget: usize,
    pub mode: HistoryMode,
    pub session: SessionOptions,
    /// Keep the full prompt text in every record.
    pub log_prompts: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            limit: DEFAULT_LIMIT,
            budget: TokenBudget::DEFAULT_MAX,
            mode: HistoryMode::FullHistory,
            session: SessionOptions::default(),
            log_prompts: false,
        }
    }
}

impl EpisodeConfig {
    /// Decisions allowed per episode. Intercepted actions cost no step, so
    /// the total is capped separately to stop a policy that repeats them.
    pub fn decision_cap(&self) -> usize {
        if self.session.intercepts_consume_steps {
            self.limit
        } else {
            self.limit.saturating_mul(2)
        }
    }
}

/// Plays `variation` with `policy` until win, failure or the step limit.
pub fn run_episode(
    variation: &TaskVariation,
    policy: &mut dyn Policy,
    seed: u64,
    config: &EpisodeConfig,
    budget: &TokenBudget,
) -> EpisodeResult {
    let mut session = Session::new(variation, config.session);
    let mut error = None;
    while !session.finished()
        && session.env_steps() < config.limit
        && session.records().len() < config.decision_cap()
    {
        let packed = match pack_transcript(session.transcript(), budget, config.mode) {
            Ok(p) => p,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let ctx = PolicyContext {
            prompt: &packed.text,
            step: session.env_steps(),
            decision: session.records().len(),
            variation,
            world: session.world(),
        };
        let decision = match policy.decide(&ctx) {
            Ok(d) => d,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        session.act(&decision.action_text);
        let record = session.records.last_mut().expect("recorded");
        record.prompt_turns = packed.turns;
        record.prompt_pieces = packed.pieces;
        record.prompt_ends_with_cue = packed.text.ends_with(ACTION_CUE);
        record.latency_ms = decision.latency_ms;
        if decision.raw_completion != decision.action_text {
            record.raw_completion = Some(decision.raw_completion);
        }
        if config.log_prompts {
            record.prompt = Some(packed.text);
        }
    }
    finish(session, seed, error)
}

fn finish(session: Session, seed: u64, error: Option<String>) -> EpisodeResult {
    let outcome = if error.is_some() {
        Outcome::Aborted
    } else if session.won() {
        Outcome::Won
    } else if session.failed() {
        Outcome::Lost
    } else {
        Outcome::LimitReached
    };
    let v = session.variation();
    EpisodeResult {
        variation: v.id.clone(),
        task: v.task.clone(),
        split: v.split,
        seed,
        outcome,
        score: session.score(),
        score_zero_on_fail: session.score_under(FailConvention::ZeroOnFail),
        score_last_on_fail: session.score_under(FailConvention::LastScoreOnFail),
        env_steps: session.env_steps(),
        error,
        actions: session.records().iter().map(|r| r.action.clone()).collect(),
        records: session.records,
    }
}

fn aborted(
    variation: &TaskVariation,
    seed: u64,
    error: &Error,
    convention: FailConvention,
) -> EpisodeResult {
    let session = Session::new(
        variation,
        SessionOptions {
            convention,
            ..SessionOptions::default()
        },
    );
    finish(session, seed, Some(error.to_string()))
}

/// Every (seed, variation) episode, in seed-major catalog order.
pub fn run_evaluation(
    variations: &[TaskVariation],
    factory: &PolicyFactory,
    seeds: &[u64],
    config: &EpisodeConfig,
    workers: usize,
) -> Result<Vec<EpisodeResult>> {
    let budget = TokenBudget::new(config.budget);
    let jobs: Vec<(u64, &TaskVariation)> = seeds
        .iter()
        .flat_map(|&s| variations.iter().map(move |v| (s, v)))
        .collect();
    let run = |&(seed, variation): &(u64, &TaskVariation)| match factory.build(variation, seed) {
        Ok(mut policy) => run_episode(variation, policy.as_mut(), seed, config, &budget),
        Err(e) => aborted(variation, seed, &e, config.session.convention),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(run).collect()))
}

/// Micro (mean over games) and macro (mean of per-task means) scores.
pub fn micro_macro<'a>(games: impl IntoIterator<Item = (&'a str, f64)>) -> Option<(f64, f64)> {
    let mut by_task: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    let mut total = 0.0;
    let mut n = 0usize;
    for (task, score) in games {
        let e = by_task.entry(task).or_default();
        e.0 += score;
        e.1 += 1;
        total += score;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let macro_score =
        by_task.values().map(|(s, c)| s / *c as f64).sum::<f64>() / by_task.len() as f64;
    Some((total / n as f64, macro_score))
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Pearson correlation, or `None` when lengths differ, fewer than two
/// points are given, or either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Score an episode would have had if cut off after `steps` env steps.
pub fn score_at(result: &EpisodeResult, steps: usize) -> u32 {
    result
        .records
        .iter()
        .take_while(|r| r.env_step <= steps)
        .last()
        .map_or(0, |r| r.score_after)
}

/// Mean truncated score at each checkpoint over non-aborted episodes.
pub fn score_curve(results: &[EpisodeResult], checkpoints: &[usize]) -> Vec<f64> {
    let live: Vec<&EpisodeResult> = results
        .iter()
        .filter(|r| r.outcome != Outcome::Aborted)
        .collect();
    checkpoints
        .iter()
        .map(|&c| {
            if live.is_empty() {
                0.0
            } else {
                live.iter().map(|r| score_at(r, c) as f64).sum::<f64>() / live.len() as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task: String,
    pub games: usize,
    pub mean: f64,
    /// Across seeds.
    pub std_dev: f64,
    pub won: usize,
    pub lost: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub micro: f64,
    pub macro_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub episodes: usize,
    pub aborted: usize,
    pub won: usize,
    pub lost: usize,
    pub limit_reached: usize,
    pub micro: f64,
    pub macro_score: f64,
    pub micro_std: f64,
    pub macro_std: f64,
    pub per_seed: Vec<SeedRow>,
    pub per_task: Vec<TaskRow>,
    pub total_actions: usize,
    pub category_counts: BTreeMap<String, usize>,
    pub category_percentages: BTreeMap<String, f64>,
    pub interceptions: usize,
    /// Redundant actions that reached the engine.
    pub redundant_to_env: usize,
    pub redundant_to_env_pct: f64,
    pub curve: Vec<CurvePoint>,
}

impl RunReport {
    pub fn percentage(&self, category: ActionCategory) -> f64 {
        self.category_percentages
            .get(category.short_name())
            .copied()
            .unwrap_or(0.0)
    }
}

/// Aggregates finished episodes. Aborted episodes are counted but kept out
/// of every mean.
pub fn aggregate(
    label: &str,
    results: &[EpisodeResult],
    checkpoints: &[usize],
) -> Result<RunReport> {
    if results.is_empty() {
        return Err(Error::NoResults);
    }
    let live: Vec<&EpisodeResult> = results
        .iter()
        .filter(|r| r.outcome != Outcome::Aborted)
        .collect();
    let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count();
    let (micro, macro_score) =
        micro_macro(live.iter().map(|r| (r.task.as_str(), r.score as f64))).unwrap_or((0.0, 0.0));

    let mut by_seed: BTreeMap<u64, Vec<&EpisodeResult>> = BTreeMap::new();
    for r in &live {
        by_seed.entry(r.seed).or_default().push(r);
    }
    let per_seed: Vec<SeedRow> = by_seed
        .iter()
        .map(|(&seed, rs)| {
            let (micro, macro_score) =
                micro_macro(rs.iter().map(|r| (r.task.as_str(), r.score as f64)))
                    .unwrap_or_default();
            SeedRow {
                seed,
                micro,
                macro_score,
            }
        })
        .collect();

    let mut tasks: BTreeMap<&str, Vec<&EpisodeResult>> = BTreeMap::new();
    for r in &live {
        tasks.entry(r.task.as_str()).or_default().push(r);
    }
    let per_task = tasks
        .iter()
        .map(|(task, rs)| {
            let mean = rs.iter().map(|r| r.score as f64).sum::<f64>() / rs.len() as f64;
            let mut seed_means: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
            for r in rs {
                let e = seed_means.entry(r.seed).or_default();
                e.0 += r.score as f64;
                e.1 += 1;
            }
            let seed_means: Vec<f64> = seed_means.values().map(|(s, c)| s / *c as f64).collect();
            TaskRow {
                task: task.to_string(),
                games: rs.len(),
                mean,
                std_dev: std_dev(&seed_means),
                won: rs.iter().filter(|r| r.outcome == Outcome::Won).count(),
                lost: rs.iter().filter(|r| r.outcome == Outcome::Lost).count(),
            }
        })
        .collect();

    let records: Vec<&ActionRecord> = live.iter().flat_map(|r| &r.records).collect();
    let total_actions = records.len();
    let mut category_counts: BTreeMap<String, usize> = ActionCategory::ALL
        .iter()
        .map(|c| (c.short_name().to_string(), 0))
        .collect();
    for r in &records {
        *category_counts
            .entry(r.category().short_name().to_string())
            .or_default() += 1;
    }
    let pct = |n: usize| {
        if total_actions == 0 {
            0.0
        } else {
            100.0 * n as f64 / total_actions as f64
        }
    };
    let category_percentages = category_counts
        .iter()
        .map(|(k, &n)| (k.clone(), pct(n)))
        .collect();
    let redundant_to_env = records
        .iter()
        .filter(|r| r.category() == ActionCategory::Redundant && !r.intercepted)
        .count();

    let curve = checkpoints
        .iter()
        .zip(score_curve(results, checkpoints))
        .map(|(&step, mean_score)| CurvePoint { step, mean_score })
        .collect();

    Ok(RunReport {
        label: label.to_string(),
        episodes: results.len(),
        aborted: count(Outcome::Aborted),
        won: count(Outcome::Won),
        lost: count(Outcome::Lost),
        limit_reached: count(Outcome::LimitReached),
        micro,
        macro_score,
        micro_std: std_dev(&per_seed.iter().map(|s| s.micro).collect::<Vec<_>>()),
        macro_std: std_dev(&per_seed.iter().map(|s| s.macro_score).collect::<Vec<_>>()),
        per_seed,
        per_task,
        total_actions,
        category_counts,
        category_percentages,
        interceptions: records.iter().filter(|r| r.intercepted).count(),
        redundant_to_env,
        redundant_to_env_pct: pct(redundant_to_env),
        curve,
    })
}

/// Summary table, one row per run.
pub fn summary_table(reports: &[&RunReport], baseline: Option<f64>) -> String {
    let mut out = String::new();
    let width = reports
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let _ = writeln!(
        out,
        "{:<width$}  {:>6}  {:>7}  {:>7}  {:>4}  {:>4}  {:>6}  {:>5}  {:>5}  {:>5}  {:>5}  {:>5}",
        "Train",
        "Score",
        "Std.Dev",
        "Improv.",
        "Won",
        "Lost",
        "Valid",
        "AVs",
        "IOs",
        "IS",
        "RAs",
        "Other"
    );
    for r in reports {
        let improvement = match baseline {
            Some(b) if b > 0.0 => format!("{:.2}x", r.micro / b),
            _ => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.2}  {:>7.2}  {:>7}  {:>4}  {:>4}  {:>6.2}  {:>5.2}  {:>5.2}  {:>5.2}  {:>5.2}  {:>5.2}",
            r.label,
            r.micro,
            r.micro_std,
            improvement,
            r.won,
            r.lost,
            r.percentage(ActionCategory::Valid),
            r.percentage(ActionCategory::AffordanceViolation),
            r.percentage(ActionCategory::InvalidObject),
            r.percentage(ActionCategory::InvalidSyntax),
            r.percentage(ActionCategory::Redundant),
            r.percentage(ActionCategory::Other),
        );
    }
    out
}

/// Per-task table with "mean (std)" cells, one column per run.
pub fn per_task_table(reports: &[&RunReport]) -> String {
    let mut tasks: Vec<&str> = reports
        .iter()
        .flat_map(|r| r.per_task.iter().map(|t| t.task.as_str()))
        .collect();
    tasks.sort();
    tasks.dedup();
    let width = tasks.iter().map(|t| t.len()).max().unwrap_or(4).max(4);
    let mut out = format!("{:<width$}", "Task");
    for r in reports {
        let _ = write!(out, "  {:>16}", r.label);
    }
    out.push('\n');
    for task in tasks {
        let _ = write!(out, "{task:<width$}");
        for r in reports {
            let cell = r
                .per_task
                .iter()
                .find(|t| t.task == task)
                .map_or("-".to_string(), |t| {
                    format!("{:.2} ({:.2})", t.mean, t.std_dev)
                });
            let _ = write!(out, "  {cell:>16}");
        }
        out.push('\n');
    }
    out
}

pub fn micro_macro_table(reports: &[&RunReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = format!("{:<width$}  {:>8}  {:>8}\n", "Train", "Micro", "Macro");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.2}  {:>8.2}",
            r.label, r.micro, r.macro_score
        );
    }
    out
}

/// Pairwise Pearson correlation of per-task means between runs, over the
/// tasks every run has.
pub fn pearson_matrix(reports: &[&RunReport]) -> Vec<Vec<Option<f64>>> {
    let means = |r: &RunReport| -> BTreeMap<String, f64> {
        r.per_task
            .iter()
            .map(|t| (t.task.clone(), t.mean))
            .collect()
    };
    let all: Vec<BTreeMap<String, f64>> = reports.iter().map(|r| means(r)).collect();
    let common: Vec<&String> = all
        .first()
        .map(|m| {
            m.keys()
                .filter(|k| all.iter().all(|o| o.contains_key(*k)))
                .collect()
        })
        .unwrap_or_default();
    all.iter()
        .map(|a| {
            all.iter()
                .map(|b| {
                    let xs: Vec<f64> = common.iter().map(|k| a[*k]).collect();
                    let ys: Vec<f64> = common.iter().map(|k| b[*k]).collect();
                    pearson(&xs, &ys)
                })
                .collect()
        })
        .collect()
}

pub fn pearson_table(reports: &[&RunReport]) -> String {
    let matrix = pearson_matrix(reports);
    let width = reports
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = format!("{:<width$}", "");
    for r in reports {
        let _ = write!(out, "  {:>w$}", r.label, w = width);
    }
    out.push('\n');
    for (r, row) in reports.iter().zip(&matrix) {
        let _ = write!(out, "{:<width$}", r.label);
        for v in row {
            let cell = v.map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ = write!(out, "  {cell:>width$}");
        }
        out.push('\n');
    }
    out
}

pub fn curve_csv(report: &RunReport) -> String {
    let mut out = String::from("step,mean_score\n");
    for p in &report.curve {
        let _ = writeln!(out, "{},{:.6}", p.step, p.mean_score);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{OraclePolicy, ReplayPolicy};
    use crate::tasks::Catalog;

    fn fake(task: &str, seed: u64, score: u32) -> EpisodeResult {
        EpisodeResult {
            variation: format!("{task}-{seed}"),
            task: task.into(),
            split: Split::Test,
            seed,
            outcome: if score == 100 {
                Outcome::Won
            } else {
                Outcome::LimitReached
            },
            score,
            score_zero_on_fail: score,
            score_last_on_fail: score,
            env_steps: 1,
            error: None,
            actions: vec![],
            records: vec![],
        }
    }

    #[test]
    fn micro_and_macro_by_hand() {
        let (micro, macro_score) = micro_macro([("a", 100.0), ("a", 0.0), ("b", 50.0)]).unwrap();
        assert_eq!((micro, macro_score), (50.0, 50.0));
        let skewed = [
            ("a", 100.0),
            ("a", 100.0),
            ("a", 100.0),
            ("a", 0.0),
            ("b", 0.0),
        ];
        assert_eq!(micro_macro(skewed).unwrap(), (60.0, 37.5));
        assert_eq!(
            micro_macro([("a", 100.0), ("b", 100.0)]).unwrap(),
            (100.0, 100.0)
        );
    }

    #[test]
    fn pearson_cases() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[-1.0, 0.0, 1.0], &[1.0, 0.0, -1.0]).unwrap() + 1.0).abs() < 1e-12);
        // sums of products around the means 2 and 13/3: sxy = 5, sxx = 2, syy = 114/9
        let expected = 5.0 / (2.0f64 * 114.0 / 9.0).sqrt();
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 0.99340).abs() < 1e-4);
        assert_eq!(pearson(&[1.0, 1.0], &[2.0, 3.0]), None);
    }

    #[test]
    fn classify_examples() {
        let mut world = crate::world::WorldSpec::builtin().build(0).unwrap();
        let kitchen = world.room_id("kitchen").unwrap();
        world.agent_room = kitchen;
        assert_eq!(
            classify("pour chair into sink", &world, None),
            ActionCategory::AffordanceViolation
        );
        assert_eq!(
            classify("open portal gun", &world, None),
            ActionCategory::InvalidObject
        );
        assert_eq!(
            classify("dance wildly", &world, None),
            ActionCategory::InvalidSyntax
        );
        execute(&mut world, "open door to hallway");
        assert_eq!(
            classify("open door to hallway", &world, None),
            ActionCategory::Redundant
        );
        assert_eq!(
            classify("open freezer", &world, None),
            ActionCategory::Valid
        );
    }

    #[test]
    fn oracle_episode_wins_in_gold_length() {
        let v = Catalog::builtin()
            .enumerate("boiling", 10, 4)
            .unwrap()
            .remove(0);
        let gold = crate::planner::plan(&v).unwrap().remove(0).actions;
        let mut policy = OraclePolicy::new(&v).unwrap();
        let r = run_episode(
            &v,
            &mut policy,
            0,
            &EpisodeConfig::default(),
            &TokenBudget::default(),
        );
        assert_eq!(r.outcome, Outcome::Won);
        assert_eq!(r.score, 100);
        assert_eq!(r.env_steps, gold.len());
        assert!(r
            .records
            .iter()
            .all(|rec| rec.category() == ActionCategory::Valid && rec.prompt_ends_with_cue));
    }

    #[test]
    fn waiting_hits_the_limit() {
        let v = Catalog::builtin()
            .enumerate("melting", 10, 4)
            .unwrap()
            .remove(0);
        let mut policy = ReplayPolicy::new(vec![]);
        let r = run_episode(
            &v,
            &mut policy,
            0,
            &EpisodeConfig::default(),
            &TokenBudget::default(),
        );
        assert_eq!(r.outcome, Outcome::LimitReached);
        assert_eq!(r.records.len(), 100);
        assert_eq!(score_curve(&[r], &[0]), vec![0.0]);
    }

    #[test]
    fn focusing_on_the_wrong_thing_loses() {
        let v = Catalog::builtin()
            .enumerate("find-living-thing", 10, 4)
            .unwrap()
            .remove(0);
        let mut policy = ReplayPolicy::new(vec!["focus on picture".into()]);
        let r = run_episode(
            &v,
            &mut policy,
            0,
            &EpisodeConfig::default(),
            &TokenBudget::default(),
        );
        assert_eq!(r.outcome, Outcome::Lost);
        assert_eq!(r.score, 0);
    }

    #[test]
    fn guard_swallows_repeat_opens_without_steps() {
        let v = Catalog::builtin()
            .enumerate("melting", 10, 4)
            .unwrap()
            .remove(0);
        let script: Vec<String> = [
            "open door to kitchen",
            "open door to kitchen",
            "open door to kitchen",
            "wait",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let config = |guard| EpisodeConfig {
            limit: 4,
            session: SessionOptions {
                guard,
                ..SessionOptions::default()
            },
            ..EpisodeConfig::default()
        };
        let off = run_episode(
            &v,
            &mut ReplayPolicy::new(script.clone()),
            0,
            &config(false),
            &TokenBudget::default(),
        );
        let on = run_episode(
            &v,
            &mut ReplayPolicy::new(script),
            0,
            &config(true),
            &TokenBudget::default(),
        );
        assert_eq!(
            off.records
                .iter()
                .filter(|r| r.category() == ActionCategory::Redundant)
                .count(),
            2
        );
        assert_eq!(on.records.iter().filter(|r| r.intercepted).count(), 2);
        assert!(on
            .records
            .iter()
            .filter(|r| r.intercepted)
            .all(|r| r.category() == ActionCategory::Redundant));
        assert_eq!(on.env_steps, off.env_steps);
        assert_eq!(on.records.len(), off.records.len() + 2);
        assert_eq!(on.records[1].observation, "The door is now open.");
    }

    #[test]
    fn aggregate_counts_and_curves() {
        let results = vec![fake("a", 1, 100), fake("a", 2, 0), fake("b", 1, 50)];
        let report = aggregate("x", &results, &[0, 100]).unwrap();
        assert_eq!((report.micro, report.macro_score), (50.0, 50.0));
        assert_eq!(report.won, 1);
        assert_eq!(report.per_task.len(), 2);
        assert!(aggregate("x", &[], &[]).is_err());
        assert!(summary_table(&[&report], None).contains("Std.Dev"));
    }
}
