//! Drives the installed binary the way a user would: real processes, real
//! files, and the exit-code contract (0 clean, 3 violations, 1 errors).

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SYNTH2: &str = include_str!("../../../circuits/synth2.toml");
const L2: &str = include_str!("../../../circuits/l2.toml");

fn ocsearch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocsearch"))
        .args(args)
        .current_dir(dir)
        .env_remove("OCSEARCH_SERVER")
        .env_remove("OCSEARCH_SIMULATOR_CMD")
        .output()
        .expect("binary should spawn")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_circuit(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run_args<'a>(circuit: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "run",
        "--circuit",
        circuit,
        "--seeds",
        "3",
        "--fp-budget",
        "30",
        "--ap-iterations",
        "10",
        "--jobs",
        "1",
        "--out",
        out,
    ]
}

#[test]
fn clean_run_writes_artifacts_and_replays_identically() {
    let tmp = TempDir::new().unwrap();
    let circuit = write_circuit(tmp.path(), "synth2.toml", SYNTH2);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");

    let first = ocsearch(&run_args(&circuit, out_a.to_str().unwrap()), tmp.path());
    assert!(
        first.status.success(),
        "first run failed: {}",
        stderr_of(&first)
    );
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert!(stdout.contains("ocsearch summary v1"));

    let log_a = std::fs::read_to_string(out_a.join("log.csv")).unwrap();
    let summary_a = std::fs::read_to_string(out_a.join("summary.txt")).unwrap();
    assert!(log_a.starts_with("seed,"));
    assert!(summary_a.starts_with("ocsearch summary v1"));

    let second = ocsearch(&run_args(&circuit, out_b.to_str().unwrap()), tmp.path());
    assert!(second.status.success());
    assert_eq!(log_a, std::fs::read_to_string(out_b.join("log.csv")).unwrap());
    assert_eq!(
        summary_a,
        std::fs::read_to_string(out_b.join("summary.txt")).unwrap()
    );
}

#[test]
fn planted_violation_exits_with_code_three() {
    let tmp = TempDir::new().unwrap();
    // The well response stays above 1.2 everywhere, so a 4.0 lower bound
    // is impossible to meet and any competent search must trip it.
    let violating = SYNTH2.replacen("threshold = 0.0", "threshold = 4.0", 1);
    assert_ne!(violating, SYNTH2);
    let circuit = write_circuit(tmp.path(), "tight.toml", &violating);

    let out = ocsearch(&run_args(&circuit, "."), tmp.path());
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    let summary = std::fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(summary.contains("violations true"));
    assert!(summary.contains("violation seed"));
}

#[test]
fn oracle_is_deterministic_and_refuses_external_backends() {
    let tmp = TempDir::new().unwrap();
    let circuit = write_circuit(tmp.path(), "synth2.toml", SYNTH2);
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");

    for dir in [&dir_a, &dir_b] {
        let out = ocsearch(
            &[
                "oracle",
                "--circuit",
                &circuit,
                "--density",
                "41",
                "--out",
                dir.to_str().unwrap(),
            ],
            tmp.path(),
        );
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    let extrema_a = std::fs::read_to_string(dir_a.join("extrema.toml")).unwrap();
    let extrema_b = std::fs::read_to_string(dir_b.join("extrema.toml")).unwrap();
    assert_eq!(extrema_a, extrema_b);
    assert!(extrema_a.contains("name = \"well\""));

    let external = write_circuit(tmp.path(), "l2.toml", L2);
    let refused = ocsearch(&["oracle", "--circuit", &external], tmp.path());
    assert_eq!(refused.status.code(), Some(1));
    assert!(stderr_of(&refused).contains("synthetic"));
    assert!(!tmp.path().join("extrema.toml").exists());
}

#[test]
fn report_regenerates_summary_and_scores_against_extrema() {
    let tmp = TempDir::new().unwrap();
    let circuit = write_circuit(tmp.path(), "synth2.toml", SYNTH2);

    let run = ocsearch(&run_args(&circuit, "run"), tmp.path());
    assert!(run.status.success(), "stderr: {}", stderr_of(&run));
    let oracle = ocsearch(
        &["oracle", "--circuit", &circuit, "--density", "41", "--out", "run"],
        tmp.path(),
    );
    assert!(oracle.status.success());

    let log = tmp.path().join("run/log.csv");
    let plain = ocsearch(
        &[
            "report",
            "--circuit",
            &circuit,
            "--log",
            log.to_str().unwrap(),
            "--out",
            "plain",
        ],
        tmp.path(),
    );
    assert!(plain.status.success(), "stderr: {}", stderr_of(&plain));
    assert_eq!(
        std::fs::read_to_string(tmp.path().join("run/summary.txt")).unwrap(),
        std::fs::read_to_string(tmp.path().join("plain/summary.txt")).unwrap()
    );

    let scored = ocsearch(
        &[
            "report",
            "--circuit",
            &circuit,
            "--log",
            log.to_str().unwrap(),
            "--extrema",
            "run/extrema.toml",
            "--out",
            "scored",
        ],
        tmp.path(),
    );
    assert!(scored.status.success(), "stderr: {}", stderr_of(&scored));
    let scored_text = std::fs::read_to_string(tmp.path().join("scored/summary.txt")).unwrap();
    assert!(scored_text.contains("[metrics]"));

    let empty = write_circuit(tmp.path(), "empty.csv", "");
    let broken = ocsearch(
        &["report", "--circuit", &circuit, "--log", &empty],
        tmp.path(),
    );
    assert_eq!(broken.status.code(), Some(1));
}

#[test]
fn invalid_configurations_fail_before_any_work() {
    let tmp = TempDir::new().unwrap();
    let circuit = write_circuit(tmp.path(), "synth2.toml", SYNTH2);

    let starved = ocsearch(
        &["run", "--circuit", &circuit, "--fp-budget", "2"],
        tmp.path(),
    );
    assert_eq!(starved.status.code(), Some(1));
    assert!(stderr_of(&starved).contains("fp_budget"));

    let seedless = ocsearch(
        &["run", "--circuit", &circuit, "--seeds", "0"],
        tmp.path(),
    );
    assert_eq!(seedless.status.code(), Some(1));
    assert!(stderr_of(&seedless).contains("seed"));

    assert!(!tmp.path().join("log.csv").exists());
    assert!(!tmp.path().join("summary.txt").exists());
}
