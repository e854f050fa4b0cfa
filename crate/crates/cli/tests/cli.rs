use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(format!("{name}.model"))
}

fn pfsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfsa")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_model(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("m.model");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn bundled_models_validate() {
    for name in ["mission", "tiger", "model1", "model2", "fourstate"] {
        let o = pfsa(&["validate", fixture(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).starts_with("valid:"));
    }
}

#[test]
fn row_sum_defect_names_the_state() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_model(
        dir.path(),
        r#"{"states":["a","b"],"events":["x"],"transitions":[
            {"from":"a","event":"x","to":"b","prob":0.5},
            {"from":"b","event":"x","to":"a","prob":1.0}]}"#,
    );
    let o = pfsa(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1, "{out}");
    assert!(out.contains("state a"), "{out}");
}

#[test]
fn malformed_document_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_model(dir.path(), "{\n  \"states\": [\"a\",\n}");
    let o = pfsa(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_parse_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_model(dir.path(), r#"{"states":["a"],"events":["x"],"transitions":[],"extra":0}"#);
    let o = pfsa(&["synthesize", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("extra"));
}

#[test]
fn missing_file_is_a_runtime_failure() {
    let o = pfsa(&["validate", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn synthesis_report_lists_policy_and_measure() {
    let o = pfsa(&["synthesize", fixture("mission").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("D* = {"), "{out}");
    assert!(out.contains("theta_min = "));
    assert!(out.contains("iterations = "));
    let measure: Vec<&str> = out.lines().skip_while(|l| *l != "nu*:").skip(1).collect();
    assert_eq!(measure.len(), 4);
    for line in measure {
        let value = line.split_whitespace().last().unwrap();
        assert_eq!(value.split('.').nth(1).unwrap().len(), 6, "{line}");
    }
}

#[test]
fn no_controllables_gives_empty_policy() {
    let o = pfsa(&["synthesize", fixture("fourstate").to_str().unwrap()]);
    assert!(stdout(&o).starts_with("D* = ∅"), "{}", stdout(&o));
}

#[test]
fn tiger_full_observation_disables_listening() {
    let o = pfsa(&["synthesize", fixture("tiger").to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut rows = csv::Reader::from_reader(out.as_bytes());
    let headers = rows.headers().unwrap().clone();
    assert_eq!(&headers, vec!["state", "nu_star", "disabled_events", "theta_min", "iterations"]);
    let disabled: Vec<(String, String)> = rows
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[2].to_string())
        })
        .filter(|(_, d)| !d.is_empty())
        .collect();
    assert!(disabled.iter().any(|(_, d)| d.split(';').any(|e| e == "l")), "{out}");
}

#[test]
fn theta_override_is_used() {
    let o = pfsa(&["synthesize", fixture("mission").to_str().unwrap(), "--theta-override", "0.25"]);
    assert!(stdout(&o).contains("theta_min = 2.5e-1"), "{}", stdout(&o));
    let bad = pfsa(&["synthesize", fixture("mission").to_str().unwrap(), "--theta-override", "1.5"]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn simulate_all_writes_every_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let model = fixture("mission");
    let o = pfsa(&[
        "simulate",
        model.to_str().unwrap(),
        "--policy=all",
        "--steps",
        "300",
        "--runs",
        "3",
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for policy in ["null", "perfect", "partial", "perfect_blind"] {
        let text = fs::read_to_string(out.join(format!("{policy}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 301, "{policy}");
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn zero_steps_gives_header_only_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfsa(&[
        "simulate",
        fixture("tiger").to_str().unwrap(),
        "--policy",
        "partial",
        "--steps",
        "0",
        "--traces",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for file in ["partial.csv", "partial_runs.csv"] {
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(text.lines().count(), 1, "{file}");
    }
}

#[test]
fn fixed_seed_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture("model1");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = pfsa(&[
            "simulate",
            model.to_str().unwrap(),
            "--steps",
            "200",
            "--runs",
            "4",
            "--seed",
            "5",
            "--traces",
            "--initial-state",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn unknown_policy_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfsa(&[
        "simulate",
        fixture("mission").to_str().unwrap(),
        "--policy",
        "greedy",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("greedy"));
}

#[test]
fn fully_observable_model_has_only_pure_states() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_model(
        dir.path(),
        r#"{"states":["a","b","c"],"events":["x","y"],"transitions":[
            {"from":"a","event":"x","to":"b","prob":0.5},
            {"from":"a","event":"y","to":"c","prob":0.5},
            {"from":"b","event":"x","to":"c","prob":1.0},
            {"from":"c","event":"y","to":"a","prob":1.0}],
            "chi":{"a":1.0}}"#,
    );
    let o = pfsa(&["entangled", p.to_str().unwrap(), "--show"]);
    let out = stdout(&o);
    assert!(out.contains("entangled states: 3"), "{out}");
    assert!(out.contains("saturated: false"));
    assert_eq!(out.lines().filter(|l| l.starts_with('[')).count(), 3);
}

#[test]
fn saturation_is_flagged_not_fatal() {
    let o = pfsa(&["entangled", fixture("model2").to_str().unwrap(), "--cap", "50", "--theta", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("entangled states: 50"), "{out}");
    assert!(out.contains("saturated: true"));
}
