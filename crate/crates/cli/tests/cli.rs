use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn fermi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermi"))
        .args(args)
        .env_remove("FERMI_KB_PATH")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const JELLY: &str = "Q0 -> Div(Q1, Q2)\nQ1 -> A1 because F1\nQ2 -> A2 because F2\nA1: 0.67 ft**3\nA2: 0.00012 ft**3";

#[test]
fn check_reports_each_file_and_exit_code() {
    let d = tempfile::tempdir().unwrap();
    let good = write(d.path(), "good.txt", JELLY);
    let bad = write(d.path(), "bad.txt", "Q0 -> Mul(Q1, Q2)\nQ1 -> A1 because F1\nA1: 3");
    let o = fermi(&["program", "check", &good]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("good.txt: valid"));
    let o = fermi(&["program", "check", &good, &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("bad.txt: invalid (undefined_reference)"));
}

#[test]
fn exec_trace_lists_every_question() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "j.txt", JELLY);
    let o = fermi(&["program", "exec", &f, "--trace"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for q in ["Q0 = ", "Q1 = ", "Q2 = "] {
        assert!(out.contains(q), "{out}");
    }
}

#[test]
fn strict_units_rejects_unknown_unit() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "u.txt", "Q0 -> A1 because F1\nA1: 3 furlongs");
    assert!(fermi(&["program", "exec", &f]).status.success());
    let o = fermi(&["program", "exec", &f, "--strict-units", "--errors-json"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let last = err.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(last).unwrap();
    assert_eq!(v[0]["kind"], "invalid_value");
}

#[test]
fn missing_file_is_an_io_error() {
    let o = fermi(&["program", "exec", "/nonexistent/p.txt"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(fermi(&["frobnicate"]).status.code(), Some(2));
    let o = fermi(&["tasks", "build", "--task", "9", "--in", "x", "--seed", "1", "--out", "y"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kb_validate_sample_and_broken() {
    let kb = fixtures().join("sample_kb.txt");
    let o = fermi(&["kb", "validate", kb.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ok: 123 objects, 283 entries, sha256 "));

    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "bad.txt", "pool | volume | 2500 m**3 | x\npool | volume | 3 kg | y\nlonely line\n");
    let o = fermi(&["kb", "validate", &f]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("line 2"), "{out}");
    assert!(out.contains("line 3"), "{out}");
}

#[test]
fn gen_needs_a_kb() {
    let d = tempfile::tempdir().unwrap();
    let o = fermi(&["gen", "--size", "12", "--decompose-fraction", "0", "--seed", "1", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_reads_kb_from_environment_and_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let kb = fixtures().join("sample_kb.txt");
    let run = |out: &Path, jobs: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_fermi"))
            .args(["--jobs", jobs, "gen", "--size", "60", "--decompose-fraction", "0.5", "--seed", "9", "--out"])
            .arg(out)
            .env("FERMI_KB_PATH", &kb)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    };
    run(&d.path().join("a"), "1");
    run(&d.path().join("b"), "4");
    for f in ["records.jsonl", "train.jsonl", "validation.jsonl", "test.jsonl", "manifest.json"] {
        assert_eq!(
            std::fs::read(d.path().join("a").join(f)).unwrap(),
            std::fs::read(d.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn gen_rejects_bad_fraction() {
    let d = tempfile::tempdir().unwrap();
    let kb = fixtures().join("sample_kb.txt");
    let o = fermi(&[
        "gen", "--kb", kb.to_str().unwrap(), "--size", "12", "--decompose-fraction", "1.5", "--seed", "1", "--out",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn score_missing_and_unknown_predictions() {
    let d = tempfile::tempdir().unwrap();
    let gold = fixtures().join("realfp_sample.jsonl");
    let pred = write(
        d.path(),
        "pred.jsonl",
        "{\"id\":\"real-0001\",\"answer_value\":65016,\"answer_unit\":\"L\"}\n{\"id\":\"nope\",\"answer_value\":1}\n",
    );
    let out = d.path().join("report.txt");
    let o = fermi(&[
        "score", "--task", "3", "--gold", gold.to_str().unwrap(), "--pred", &pred, "--out", out.to_str().unwrap(),
        "--per-question",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("\"nope\""));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("report.txt.json")).unwrap()).unwrap();
    // one exact answer out of three questions
    assert!((json["answer"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    let per = std::fs::read_to_string(d.path().join("report.txt.questions.jsonl")).unwrap();
    assert_eq!(per.lines().count(), 3);
    assert!(per.contains("missing_prediction"));
}

#[test]
fn baseline_prints_table_with_best_line() {
    let gold = fixtures().join("realfp_sample.jsonl");
    let o = fermi(&["baseline", "constant", "--gold", gold.to_str().unwrap(), "--points-per-decade", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1 + 41 + 1);
    assert!(out.lines().last().unwrap().starts_with("best\t"));
}
