//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS or FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textlab_core::eval::{
    aggregate, classify, execute, micro_macro, run_episode, run_evaluation, score_curve,
    EpisodeConfig, EpisodeResult, Outcome, SessionOptions,
};
use textlab_core::planner::{plan_all, replay, sample_trainsets, TrainSetName, PER_TASK_CAP};
use textlab_core::policy::{
    scripted_responder, CompletionConfig, MockServer, PolicyFactory, PolicySpec, ReplayPolicy,
};
use textlab_core::tasks::{Catalog, Split, TaskVariation};
use textlab_core::transcript::{pack_context, DialogTurn, HistoryMode, TokenBudget};
use textlab_core::world::{EntitySpec, Kind, Location, Receptacle, WorldSpec, WorldState};
use textlab_core::ActionCategory;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn catalog(seed: u64) -> Vec<TaskVariation> {
    Catalog::builtin().generate(seed, &BTreeMap::new()).unwrap()
}

fn test_split(seed: u64) -> Vec<TaskVariation> {
    catalog(seed)
        .into_iter()
        .filter(|v| v.split == Split::Test)
        .collect()
}

fn gold_paths_replay() -> Check {
    let start = Instant::now();
    let variations = catalog(0);
    let plans = plan_all(&variations).map_err(|e| e.to_string())?;
    let mut paths = 0;
    for (v, group) in variations.iter().zip(&plans) {
        ensure(!group.is_empty(), || format!("{} has no gold path", v.id))?;
        for p in group {
            let r = replay(v, &p.actions);
            ensure(
                r.won && r.score == 100 && r.steps == p.actions.len(),
                || {
                    format!(
                        "{} replays to {} after {} of {} steps",
                        v.id,
                        r.score,
                        r.steps,
                        p.actions.len()
                    )
                },
            )?;
            paths += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "{paths} paths over {} variations in {elapsed:.2}s",
        variations.len()
    ))
}

fn trainset_chain() -> Check {
    let variations = catalog(0);
    let plans = plan_all(&variations).map_err(|e| e.to_string())?;
    let train: Vec<_> = variations
        .iter()
        .zip(&plans)
        .filter(|(v, _)| v.split == Split::Train)
        .map(|(_, p)| p.clone())
        .collect();
    let [all, one, capped] = sample_trainsets(&train, 0);
    ensure(
        all.name == TrainSetName::AllTrain && capped.name == TrainSetName::UpTo18,
        || "set order".into(),
    )?;
    ensure(
        all.gameplays.len() == train.iter().map(Vec::len).sum::<usize>(),
        || "all-train is not every path".into(),
    )?;
    ensure(
        one.gameplays.iter().all(|g| all.gameplays.contains(g)),
        || "no-variations not in all-train".into(),
    )?;
    ensure(
        capped.gameplays.iter().all(|g| one.gameplays.contains(g)),
        || "up-to-18 not in no-variations".into(),
    )?;

    let mut train_per_task: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for v in variations.iter().filter(|v| v.split == Split::Train) {
        train_per_task.entry(&v.task).or_default().insert(&v.id);
    }
    let one_vars: BTreeSet<&str> = one.gameplays.iter().map(|g| g.variation.as_str()).collect();
    ensure(one_vars.len() == one.gameplays.len(), || {
        "no-variations repeats a variation".into()
    })?;
    ensure(one_vars.len() == train.len(), || {
        "no-variations misses a variation".into()
    })?;
    for (task, ids) in &train_per_task {
        let taken: Vec<_> = capped
            .gameplays
            .iter()
            .filter(|g| g.task == *task)
            .collect();
        ensure(taken.len() == ids.len().min(PER_TASK_CAP), || {
            format!("{task}: {} of {} kept", taken.len(), ids.len())
        })?;
    }
    let large = train_per_task
        .values()
        .filter(|ids| ids.len() > PER_TASK_CAP)
        .count();
    Ok(format!(
        "{} / {} / {}; tasks over the cap of {PER_TASK_CAP}: {large}",
        all.gameplays.len(),
        one.gameplays.len(),
        capped.gameplays.len()
    ))
}

fn split_counts() -> Check {
    let variations = catalog(0);
    let table = Catalog::split_table(&variations);
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for v in &variations {
        *totals.entry(&v.task).or_default() += 1;
    }
    for (task, &n) in &totals {
        // half rounded up to train, a quarter rounded half-up to dev, rest test
        let train = (n as f64 * 0.5).round() as usize;
        let dev = ((n - train) as f64 * 0.5).round() as usize;
        let test = n - train - dev;
        let got = table.tasks[*task];
        ensure((got.train, got.dev, got.test) == (train, dev, test), || {
            format!("{task}: {}/{}/{} for {n}", got.train, got.dev, got.test)
        })?;
    }
    ensure(totals.len() == 9, || {
        format!("{} task classes", totals.len())
    })?;
    Ok(format!(
        "{} tasks, {} variations",
        totals.len(),
        variations.len()
    ))
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| format!("w{}", rng.gen_range(0..50)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Largest suffix that fits, found by trying every length from the top.
fn brute_force(desc: &str, turns: &[DialogTurn], budget: &TokenBudget) -> Option<String> {
    (1..=turns.len()).rev().find_map(|k| {
        let mut text = format!("{desc}\n\n");
        for t in &turns[turns.len() - k..] {
            text.push_str(&format!("A: {}\nG: {}\n", t.action, t.observation));
        }
        text.push_str("A:");
        (budget.count(&text) <= budget.max_pieces).then_some(text)
    })
}

fn packing_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut errors = 0;
    for case in 0..1000 {
        let len = rng.gen_range(5..40);
        let desc = words(&mut rng, len);
        let n = rng.gen_range(1..60);
        let turns: Vec<DialogTurn> = (0..n)
            .map(|_| {
                // one piece from the action word, ~1.3 per observation word
                let obs = rng.gen_range(3..152);
                DialogTurn::new(words(&mut rng, 1), words(&mut rng, obs)).unwrap()
            })
            .collect();
        let budget = TokenBudget::new(rng.gen_range(256..=4096));
        let got = pack_context(&desc, &turns, &budget, HistoryMode::FullHistory);
        match (got, brute_force(&desc, &turns, &budget)) {
            (Ok(p), Some(expected)) => ensure(p.text == expected, || {
                format!("case {case}: {} turns packed", p.turns)
            })?,
            (Err(_), None) => errors += 1,
            (got, expected) => {
                return Err(format!(
                    "case {case}: packer ok={} oracle ok={}",
                    got.is_ok(),
                    expected.is_some()
                ));
            }
        }
    }
    Ok(format!(
        "1000 cases equal ({errors} oversize latest turns rejected by both)"
    ))
}

fn markov_single_turn() -> Check {
    let variations = test_split(0);
    let factory = PolicyFactory::new(&PolicySpec::Random, &CompletionConfig::default())
        .map_err(|e| e.to_string())?;
    let config = EpisodeConfig {
        mode: HistoryMode::Markov,
        log_prompts: true,
        limit: 50,
        ..EpisodeConfig::default()
    };
    let results =
        run_evaluation(&variations, &factory, &[0], &config, 4).map_err(|e| e.to_string())?;
    let mut prompts = 0;
    for r in &results {
        for rec in &r.records {
            let prompt = rec.prompt.as_deref().unwrap_or_default();
            ensure(
                rec.prompt_turns == 1
                    && prompt.matches("\nA: ").count() + prompt.starts_with("A: ") as usize == 1,
                || format!("{}: prompt with {} turns", r.variation, rec.prompt_turns),
            )?;
            prompts += 1;
        }
    }
    Ok(format!("{prompts} prompts, each with one prior turn"))
}

fn fixture_world() -> WorldState {
    let spec = WorldSpec::builtin();
    let mut world = spec.build(0).unwrap();
    let kitchen = world.room_id("kitchen").unwrap();
    for name in ["blue box", "orange box"] {
        let b = EntitySpec {
            name: Some(name.into()),
            kind: Some(Kind::Container),
            receptacle: Some(Receptacle::Containing),
            ..Default::default()
        };
        spec.spawn(&mut world, &b, Location::Room(kitchen)).unwrap();
    }
    world.agent_room = kitchen;
    execute(&mut world, "open fridge");
    world
}

fn classifier_calibrated() -> Check {
    use ActionCategory::*;
    let fixtures: [(&str, ActionCategory); 24] = [
        ("open freezer", Valid),
        ("look around", Valid),
        ("pick up thermometer", Valid),
        ("activate stove", Valid),
        ("look at oven", Valid),
        ("pick up counter", AffordanceViolation),
        ("pour chair into sink", AffordanceViolation),
        ("go to hallway", AffordanceViolation),
        ("open chair", AffordanceViolation),
        ("open portal gun", InvalidObject),
        ("pick up unicorn", InvalidObject),
        ("focus on dragon", InvalidObject),
        ("look at spaceship", InvalidObject),
        ("dance wildly", InvalidSyntax),
        ("xyzzy", InvalidSyntax),
        ("please the fridge", InvalidSyntax),
        ("open", InvalidSyntax),
        ("open fridge", Redundant),
        ("close freezer", Redundant),
        ("close door to hallway", Redundant),
        ("deactivate stove", Redundant),
        ("look in box", Other),
        ("open box", Other),
        ("pick up box", Other),
    ];
    let world = fixture_world();
    for (action, expected) in fixtures {
        let got = classify(action, &world, None);
        ensure(got == expected, || {
            format!("{action:?}: {got:?}, expected {expected:?}")
        })?;
    }
    let variations = test_split(0);
    let factory = PolicyFactory::new(&PolicySpec::Random, &CompletionConfig::default())
        .map_err(|e| e.to_string())?;
    let results = run_evaluation(&variations, &factory, &[0, 1], &EpisodeConfig::default(), 4)
        .map_err(|e| e.to_string())?;
    let report = aggregate("random", &results, &[]).map_err(|e| e.to_string())?;
    let (is, io) = (
        report.percentage(InvalidSyntax),
        report.percentage(InvalidObject),
    );
    ensure(is == 0.0 && io == 0.0, || {
        format!("random run IS {is}% IO {io}%")
    })?;
    Ok(format!(
        "{} fixtures exact; random run over {} actions has IS = IO = 0",
        fixtures.len(),
        report.total_actions
    ))
}

/// Redundant open/close commands available in the current state, per the engine.
fn redundant_candidates(world: &WorldState) -> Vec<String> {
    let mut names: Vec<String> = world
        .neighbors(world.agent_room)
        .map(|(room, _)| format!("door to {}", world.room(room).name))
        .collect();
    for (id, _) in world.visible_entities() {
        let e = world.entity(id);
        if e.openable {
            names.push(e.name.clone());
        }
    }
    names
        .iter()
        .flat_map(|n| [format!("open {n}"), format!("close {n}")])
        .filter(|a| classify(a, world, None) == ActionCategory::Redundant)
        .collect()
}

fn injected_corpus(variations: &[TaskVariation], rate: f64) -> (Vec<Vec<String>>, usize, usize) {
    let plans = plan_all(variations).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut injected, mut total) = (0, 0);
    let corpus = variations
        .iter()
        .zip(&plans)
        .map(|(v, paths)| {
            let mut world = v.initial_world.clone();
            let mut out = Vec::new();
            for action in &paths[0].actions {
                let candidates = redundant_candidates(&world);
                if !candidates.is_empty() && rng.gen_bool(rate / (1.0 - rate)) {
                    out.push(candidates[rng.gen_range(0..candidates.len())].clone());
                    injected += 1;
                }
                execute(&mut world, action);
                out.push(action.clone());
            }
            total += out.len();
            out
        })
        .collect();
    (corpus, injected, total)
}

fn guard_efficacy() -> Check {
    let variations = catalog(0);
    let (corpus, injected, total) = injected_corpus(&variations, 0.2);
    let share = injected as f64 / total as f64;
    ensure((0.15..=0.25).contains(&share), || {
        format!("injected share {share:.3}")
    })?;
    let run = |guard: bool| -> Vec<EpisodeResult> {
        let config = EpisodeConfig {
            limit: 100_000,
            session: SessionOptions {
                guard,
                ..SessionOptions::default()
            },
            ..EpisodeConfig::default()
        };
        variations
            .iter()
            .zip(&corpus)
            .map(|(v, actions)| {
                let mut policy = ReplayPolicy::new(actions.clone());
                let r = run_episode(v, &mut policy, 0, &config, &TokenBudget::default());
                assert!(
                    r.actions.len() <= actions.len(),
                    "{} ran past its script",
                    v.id
                );
                r
            })
            .collect()
    };
    let (off, on) = (run(false), run(true));
    for (a, b) in off.iter().zip(&on) {
        ensure(a.score == b.score, || {
            format!("{}: score {} vs {}", a.variation, a.score, b.score)
        })?;
        for rec in b.records.iter().filter(|r| r.intercepted) {
            ensure(rec.category() == ActionCategory::Redundant, || {
                format!("{}: false interception of {:?}", b.variation, rec.action)
            })?;
        }
    }
    let off_report = aggregate("off", &off, &[]).map_err(|e| e.to_string())?;
    let on_report = aggregate("on", &on, &[]).map_err(|e| e.to_string())?;
    let drop = 1.0 - on_report.redundant_to_env_pct / off_report.redundant_to_env_pct;
    ensure(drop >= 0.45, || {
        format!(
            "RA to env {:.2}% -> {:.2}% is a {:.1}% drop",
            off_report.redundant_to_env_pct,
            on_report.redundant_to_env_pct,
            100.0 * drop
        )
    })?;
    Ok(format!(
        "{injected} injected ({:.1}%); RA to env {:.2}% -> {:.2}% ({:.1}% drop); {} interceptions, none false; scores unchanged",
        100.0 * share,
        off_report.redundant_to_env_pct,
        on_report.redundant_to_env_pct,
        100.0 * drop,
        on_report.interceptions
    ))
}

fn fake_result(task: &str, seed: u64, score: u32) -> EpisodeResult {
    EpisodeResult {
        variation: format!("{task}-x"),
        task: task.into(),
        split: Split::Test,
        seed,
        outcome: Outcome::LimitReached,
        score,
        score_zero_on_fail: score,
        score_last_on_fail: score,
        env_steps: 0,
        error: None,
        actions: vec![],
        records: vec![],
    }
}

fn micro_macro_reference() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for table in 0..100 {
        let tasks = rng.gen_range(1..10);
        let mut results = Vec::new();
        let mut grouped: Vec<Vec<f64>> = Vec::new();
        for t in 0..tasks {
            let n = rng.gen_range(1..30);
            let scores: Vec<u32> = (0..n).map(|_| rng.gen_range(0..=100)).collect();
            results.extend(scores.iter().map(|&s| fake_result(&format!("t{t}"), 0, s)));
            grouped.push(scores.iter().map(|&s| s as f64).collect());
        }
        let flat: Vec<f64> = grouped.iter().flatten().copied().collect();
        let micro = flat.iter().sum::<f64>() / flat.len() as f64;
        let macro_score = grouped
            .iter()
            .map(|g| g.iter().sum::<f64>() / g.len() as f64)
            .sum::<f64>()
            / grouped.len() as f64;
        let report = aggregate("t", &results, &[]).map_err(|e| e.to_string())?;
        ensure(
            (report.micro - micro).abs() <= 1e-9
                && (report.macro_score - macro_score).abs() <= 1e-9,
            || {
                format!(
                    "table {table}: {} / {} vs {micro} / {macro_score}",
                    report.micro, report.macro_score
                )
            },
        )?;
    }
    let skewed = [
        ("a", 100.0),
        ("a", 100.0),
        ("a", 100.0),
        ("a", 0.0),
        ("b", 0.0),
    ];
    let (micro, macro_score) = micro_macro(skewed).unwrap();
    ensure(micro == 60.0 && macro_score == 37.5, || {
        format!("skewed fixture gave {micro} / {macro_score}")
    })?;
    Ok("100 random tables within 1e-9; skewed fixture 60.0 / 37.5".into())
}

fn curve_shapes() -> Check {
    let variations = test_split(0);
    let plans = plan_all(&variations).map_err(|e| e.to_string())?;
    let checkpoints: Vec<usize> = (0..=100).collect();
    let longest = plans.iter().map(|p| p[0].actions.len()).max().unwrap();
    let oracle = PolicyFactory::new(&PolicySpec::Oracle, &CompletionConfig::default())
        .map_err(|e| e.to_string())?;
    let results = run_evaluation(&variations, &oracle, &[0], &EpisodeConfig::default(), 4)
        .map_err(|e| e.to_string())?;
    let curve = score_curve(&results, &checkpoints);
    ensure(curve[longest - 1] < 100.0, || {
        format!("oracle reaches 100 before step {longest}")
    })?;
    ensure(curve[longest..].iter().all(|&s| s == 100.0), || {
        format!("oracle not saturated from step {longest}")
    })?;
    ensure(curve.windows(2).all(|w| w[0] <= w[1]), || {
        "oracle curve decreases".into()
    })?;

    // replays up to half of each gold path, stopping before anything that
    // starts heating or cooling, then waits forever
    let prefix = |actions: &[String]| {
        let busy = actions.iter().position(|a| {
            a.starts_with("activate") || a.starts_with("put") || a.starts_with("move")
        });
        busy.unwrap_or(actions.len()).min(actions.len() / 2)
    };
    let stalled: Vec<EpisodeResult> = variations
        .iter()
        .zip(&plans)
        .map(|(v, p)| {
            let cut = p[0].actions[..prefix(&p[0].actions)].to_vec();
            run_episode(
                v,
                &mut ReplayPolicy::new(cut),
                0,
                &EpisodeConfig::default(),
                &TokenBudget::default(),
            )
        })
        .collect();
    let plateau = plans.iter().map(|p| prefix(&p[0].actions)).max().unwrap();
    let stall = score_curve(&stalled, &checkpoints);
    ensure(
        stall[plateau..].iter().all(|&s| s == stall[plateau]),
        || "stalled curve moves after its plateau".into(),
    )?;
    ensure(stall[plateau] > 0.0 && stall[plateau] < 100.0, || {
        format!("stalled plateau at {}", stall[plateau])
    })?;
    Ok(format!(
        "oracle saturates at step {longest}; stalling policy flat at {:.2} from step {plateau}",
        stall[plateau]
    ))
}

fn run_cli(out: &Path, policy: &str, workers: &str) -> Result<PathBuf, String> {
    let output = Command::new(env!("CARGO_BIN_EXE_textlab"))
        .args([
            "eval",
            "--policy",
            policy,
            "--seeds",
            "0,1",
            "--limit",
            "50",
            "--workers",
            workers,
        ])
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(output.status.success(), || {
        String::from_utf8_lossy(&output.stderr).into_owned()
    })?;
    let dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    ensure(dirs.len() == 1, || {
        format!("{} run directories", dirs.len())
    })?;
    Ok(dirs[0].clone())
}

fn deterministic_runs() -> Check {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut files = 0;
    for policy in ["oracle", "random"] {
        let a = run_cli(&tmp.path().join(format!("{policy}-a")), policy, "1")?;
        let b = run_cli(&tmp.path().join(format!("{policy}-b")), policy, "4")?;
        for name in [
            "manifest.json",
            "transcripts.jsonl",
            "report.json",
            "report.txt",
            "curves.csv",
        ] {
            let (x, y) = (
                std::fs::read(a.join(name)).unwrap(),
                std::fs::read(b.join(name)).unwrap(),
            );
            ensure(x == y, || format!("{policy}: {name} differs"))?;
            files += 1;
        }
    }
    Ok(format!("{files} files byte-identical across worker counts"))
}

fn mock_server_contract() -> Check {
    let server =
        MockServer::start("127.0.0.1:0", scripted_responder(), 2).map_err(|e| e.to_string())?;
    let spec: PolicySpec = format!("completion:{}", server.url()).parse()?;
    let completion = CompletionConfig {
        url: server.url().to_string(),
        backoff_ms: 5,
        ..CompletionConfig::default()
    };
    let factory = PolicyFactory::new(&spec, &completion).map_err(|e| e.to_string())?;
    let budget = 512;
    let config = EpisodeConfig {
        limit: 30,
        budget,
        ..EpisodeConfig::default()
    };
    let variations = test_split(0);
    let results =
        run_evaluation(&variations, &factory, &[0, 1], &config, 4).map_err(|e| e.to_string())?;
    let aborted = results
        .iter()
        .filter(|r| r.outcome == Outcome::Aborted)
        .count();
    ensure(results.len() >= 50, || {
        format!("only {} episodes", results.len())
    })?;
    ensure(aborted == 0, || format!("{aborted} aborted episodes"))?;
    let counter = TokenBudget::new(budget);
    let requests = server.requests();
    for req in &requests {
        ensure(req.prompt.ends_with("A:"), || {
            "prompt without the action cue".into()
        })?;
        let pieces = counter.count(&req.prompt);
        ensure(pieces <= budget, || format!("prompt of {pieces} pieces"))?;
    }
    let decisions: usize = results.iter().map(|r| r.records.len()).sum();
    ensure(requests.len() == decisions, || {
        format!("{} requests for {decisions} decisions", requests.len())
    })?;
    Ok(format!(
        "{} episodes, {} prompts, none aborted",
        results.len(),
        requests.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("gold-path soundness", gold_paths_replay),
        ("train-set construction", trainset_chain),
        ("split proportions", split_counts),
        ("packing maximality", packing_matches_oracle),
        ("markov contract", markov_single_turn),
        ("classifier calibration", classifier_calibrated),
        ("preconditions efficacy", guard_efficacy),
        ("micro/macro correctness", micro_macro_reference),
        ("score-curve shape", curve_shapes),
        ("end-to-end determinism", deterministic_runs),
        ("wire contract", mock_server_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let text = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {text}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
