use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;
use textlab_core::cli::{load_results, play, PlayArgs};
use textlab_core::planner::plan;
use textlab_core::tasks::Catalog;

fn textlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = textlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

fn only_run(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(dirs.len(), 1);
    dirs.into_iter().next().unwrap()
}

#[test]
fn gen_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let text = ok(&["gen", "--seed", "7", "--out", a.to_str().unwrap()]);
    assert!(text.contains("subset chain: ok"), "{text}");
    ok(&["gen", "--seed", "7", "--out", b.to_str().unwrap()]);
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.contains_key(Path::new("trainsets/up-to-18.jsonl")));
    assert_eq!(ta, tb);
}

#[test]
fn gen_filters_tasks_and_guards_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("m");
    ok(&["gen", "--tasks", "melting", "--out", out.to_str().unwrap()]);
    let inventory = fs::read_to_string(out.join("inventory.jsonl")).unwrap();
    assert_eq!(inventory.lines().count(), 12);
    assert!(inventory
        .lines()
        .all(|l| l.contains("\"task\":\"melting\"")));
    let gold: Vec<_> = fs::read_dir(out.join("gold")).unwrap().collect();
    assert_eq!(gold.len(), 1);

    let again = textlab(&["gen", "--tasks", "melting", "--out", out.to_str().unwrap()]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(&[
        "gen",
        "--tasks",
        "melting",
        "--out",
        out.to_str().unwrap(),
        "--force",
    ]);
}

#[test]
fn eval_runs_are_deterministic_and_reportable() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "eval", "--policy", "random", "--seeds", "0,1", "--limit", "40",
    ];
    let mut runs = Vec::new();
    for name in ["x", "y"] {
        let out = tmp.path().join(name);
        let mut full: Vec<&str> = args.to_vec();
        let out_str = out.to_str().unwrap().to_string();
        full.extend([
            "--out",
            &out_str,
            "--workers",
            if name == "x" { "1" } else { "4" },
        ]);
        ok(&full);
        runs.push(only_run(&out));
    }
    assert_eq!(runs[0].file_name(), runs[1].file_name());
    assert_eq!(tree(&runs[0]), tree(&runs[1]));

    let report = ok(&[
        "report",
        runs[0].to_str().unwrap(),
        runs[1].to_str().unwrap(),
    ]);
    assert!(report.contains("1.0000"), "{report}");

    let missing = textlab(&["report", tmp.path().join("nope").to_str().unwrap()]);
    assert!(!missing.status.success());
}

#[test]
fn rerunning_into_same_directory_is_refused() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let args = ["eval", "--tasks", "melting", "--out", out];
    ok(&args);
    assert!(!textlab(&args).status.success());
}

#[test]
fn markov_prompts_hold_one_turn() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "eval",
        "--policy",
        "random",
        "--tasks",
        "boiling",
        "--mode",
        "markov",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let results = load_results(&only_run(tmp.path())).unwrap();
    assert!(!results.is_empty());
    for r in &results {
        assert!(r
            .records
            .iter()
            .all(|a| a.prompt_turns == 1 && a.prompt_ends_with_cue));
    }
}

fn first_test_variation(task: &str) -> textlab_core::tasks::TaskVariation {
    Catalog::builtin()
        .generate(0, &BTreeMap::new())
        .unwrap()
        .into_iter()
        .find(|v| v.task == task)
        .unwrap()
}

#[test]
fn play_reports_unknown_input_and_wins() {
    let variation = first_test_variation("melting");
    let gold = plan(&variation).unwrap().remove(0);
    let mut input = String::from("flibber the gizmo\n");
    for a in &gold.actions {
        input.push_str(a);
        input.push('\n');
    }
    let args = PlayArgs {
        variation: variation.id.clone(),
        seed: 0,
        show_score: true,
        preconditions: false,
        transcript: None,
    };
    let mut out = Vec::new();
    let session = play(&variation, &args, input.as_bytes(), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(session.won());
    assert!(text.contains("No known action matches that input."));
    assert!(text.contains("[score 100]"));
    assert!(text.trim_end().ends_with("You won! Score: 100"));
}

#[test]
fn play_binary_reads_stdin() {
    let variation = first_test_variation("boiling");
    let gold = plan(&variation).unwrap().remove(0);
    let mut child = Command::new(env!("CARGO_BIN_EXE_textlab"))
        .args(["play", "--variation", &variation.id])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all((gold.actions.join("\n") + "\n").as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(&variation.description));
    assert!(text.contains("You won! Score: 100"));
}

#[test]
fn unknown_variation_fails() {
    assert!(!textlab(&["play", "--variation", "melting-999"])
        .status
        .success());
    assert!(!textlab(&["eval", "--tasks", "find-a-plant"])
        .status
        .success());
}
