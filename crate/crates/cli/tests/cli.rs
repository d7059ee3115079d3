//! End-to-end runs of the binary through its public surface.

use std::process::{Command, Output, Stdio};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_match-arena"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn gen_emits_parseable_instance_text() {
    let out = run(&["gen", "--family", "triangle"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("mode vertex\n"));
    assert!(text.contains("arrive 2 0 1"));

    let out = run(&["gen", "--family", "hard-gn", "--n", "3"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("mode edge\n"));
}

#[test]
fn run_emits_csv_and_runtime_note_on_stderr() {
    let out = run(&[
        "run",
        "--family",
        "three-edge-path",
        "--alg",
        "greedy",
        "--trials",
        "4",
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("instance,trial,value,opt,ratio"));
    assert_eq!(lines.clone().count(), 4);
    assert!(lines.all(|l| l.ends_with("5.00000000000e-1")));
    let err = String::from_utf8(out.stderr.clone()).expect("utf8 stderr");
    assert!(err.contains("4 trials"));
}

#[test]
fn identical_run_invocations_are_byte_identical() {
    let args = [
        "run",
        "--family",
        "random-bipartite",
        "--n",
        "10",
        "--alg",
        "improved",
        "--epsilon",
        "0.05",
        "--trials",
        "5",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn hardness_reports_feasibility_and_lp() {
    let out = run(&["hardness", "--n", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("feasible = true"));
    assert!(text.contains("value = 3/5"));
    assert!(text.contains("round_mass = 1"));
    assert!(text.contains("lp-matching v1 n=4"));

    let odd = run(&["hardness", "--n", "5"]);
    assert!(!odd.status.success());
}

#[test]
fn diagnose_emits_the_documented_columns() {
    let out = run(&[
        "diagnose",
        "--family",
        "path",
        "--n",
        "5",
        "--samples",
        "300",
        "--threshold-L",
        "2",
        "--k",
        "1,2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("vertex,samples,long_path_freq,classification,k,tail_freq,tail_bound\n"));
    assert_eq!(text.lines().count(), 1 + 6 * 2);
}

#[test]
fn closed_stdout_is_not_an_error_and_lp_file_still_lands() {
    // Reader that goes away after the pipe fills: exit must stay clean.
    let mut child = Command::new(env!("CARGO_BIN_EXE_match-arena"))
        .args([
            "run",
            "--family",
            "random-general",
            "--n",
            "12",
            "--alg",
            "greedy",
            "--trials",
            "3000",
            "--seed",
            "1",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("binary spawns");
    drop(child.stdout.take());
    let status = child.wait().expect("child exits");
    assert!(status.success(), "broken pipe must not fail the run");

    // The LP export is written before any stdout output.
    let dir = std::env::temp_dir().join("match-arena-lp-test");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let lp_path = dir.join("gn6.lp");
    let _ = std::fs::remove_file(&lp_path);
    let mut child = Command::new(env!("CARGO_BIN_EXE_match-arena"))
        .args(["hardness", "--n", "6", "--lp-out"])
        .arg(&lp_path)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("binary spawns");
    drop(child.stdout.take());
    assert!(child.wait().expect("child exits").success());
    let lp = std::fs::read_to_string(&lp_path).expect("LP file written");
    assert!(lp.starts_with("lp-matching v1 n=6\n"));
}

#[test]
fn bad_flags_fail_with_error_message() {
    let out = run(&["run", "--family", "nope", "--alg", "greedy"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).expect("utf8 stderr");
    assert!(err.contains("unknown family"));

    let out = run(&["run", "--family", "triangle", "--alg", "edge-greedy"]);
    assert!(!out.status.success());
}
