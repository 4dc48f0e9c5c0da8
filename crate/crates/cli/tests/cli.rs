use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(rel: &str) -> String {
    root().join("data").join(rel).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogload"))
        .args(args)
        .env("COGLOAD_NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const LOW: &str = "low_literacy.kb";
const HIGH: &str = "high_literacy.kb";

#[test]
fn uib_under_low_literacy() {
    let o = run(&["score", &data("corpus/uib.alg"), "--kb", &data(LOW)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("2e^4 + 3e^3 + e"), "{out}");
    assert!(out.contains("172.17"), "{out}");
}

#[test]
fn json_report_shape() {
    let o = run(&["score", &data("corpus/revenue_task2.alg"), "--kb", &data(HIGH), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["reportVersion"], 1);
    assert_eq!(v["symbolic"], "e^2");
    assert_eq!(v["numeric"], 7.39);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 1);
}

#[test]
fn growth_changes_numeric_only() {
    let o = run(&["score", &data("corpus/uib.alg"), "--kb", &data(LOW), "--format", "json", "--growth", "linear"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["symbolic"], "2e^4 + 3e^3 + e");
    assert_eq!(v["growth"], "linear");
    assert_eq!(v["numeric"], 18.0);
    let bad = run(&["score", &data("corpus/uib.alg"), "--kb", &data(LOW), "--growth", "cubic"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn missing_file_exits_2() {
    let o = run(&["score", "no/such/file.alg", "--kb", &data(LOW)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such/file.alg"));
    let o = run(&["score", &data("corpus/uib.alg"), "--kb", "missing.kb"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn syntax_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.alg");
    std::fs::write(&p, "input scalar x\nresult = x +\nreturn result\n").unwrap();
    let o = run(&["score", p.to_str().unwrap(), "--kb", &data(LOW)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("3:"), "{}", stderr(&o));
    let o = run(&["score", p.to_str().unwrap(), "--kb", &data(LOW), "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["reportVersion"], 1);
    assert_eq!(v["error"]["stage"], "parse");
    assert!(v["error"]["diagnostics"][0]["line"].as_u64().is_some());
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.json");
    let o = run(&["score", &data("corpus/revenue_task1.alg"), "--kb", &data(LOW), "--format", "json", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["symbolic"], "e^2 + e");
}

#[test]
fn cfg_stage_has_back_edge() {
    let o = run(&["graph", &data("corpus/revenue_task1.alg"), "--stage", "cfg"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("digraph"));
    assert!(out.contains("back"), "{out}");
}

#[test]
fn ocg_stage_under_high_literacy_collapses_task1() {
    let o = run(&["graph", &data("corpus/revenue_task1.alg"), "--stage", "ocg", "--kb", &data(HIGH)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let ops = out.lines().filter(|l| l.trim_start().starts_with("n") && l.contains("[label")).count();
    assert_eq!(ops, 1, "{out}");
    assert!(out.contains("dot_product"));
}

#[test]
fn ocg_stage_needs_kb() {
    let o = run(&["graph", &data("corpus/revenue_task1.alg"), "--stage", "ocg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_corpus_table() {
    let mut args = vec!["compare".to_string()];
    for p in ["revenue_task1", "revenue_task2", "revenue_task3", "uib", "uuknn"] {
        args.push(data(&format!("corpus/{p}.alg")));
    }
    args.extend(["--kb".into(), data(LOW), "--kb".into(), data(HIGH)]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(3).collect();
    assert_eq!(rows.len(), 5, "{out}");
    assert!(rows.iter().all(|r| r.matches(" | ").count() == 2));
    let knn = rows.iter().find(|r| r.starts_with("uuknn")).unwrap();
    assert!(knn.contains("359.69") && knn.contains("259.27"), "{knn}");
}

#[test]
fn check_subcommand() {
    let o = run(&["check", "determinism", "--seed", "3", "--iterations", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["check", "structured", "--seed", "3", "--iterations", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["check", "confluence"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_check_writes_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cex.json");
    let o = run(&["check", "monotonicity", "--seed", "20240779", "--iterations", "1", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).trim(), p.display().to_string());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert!(v.is_object());
}

#[test]
fn validate_shipped_kbs() {
    for kb in [LOW, HIGH] {
        let o = run(&["validate-kb", &data(kb)]);
        assert_eq!(o.status.code(), Some(0), "{kb}: {}", stderr(&o));
    }
}

#[test]
fn validate_rejects_cycles_and_syntax() {
    let dir = tempfile::tempdir().unwrap();
    let cyc = dir.path().join("cyc.kb");
    std::fs::write(
        &cyc,
        "[kb cyc]\nschema f(scalar a) -> scalar decomposes { x = g(a)\n y = mul(x, a) }\nschema g(scalar a) -> scalar decomposes { x = f(a)\n y = add(x, a) }\n",
    )
    .unwrap();
    let o = run(&["validate-kb", cyc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).to_lowercase().contains("cycl"), "{}", stderr(&o));

    let bad = dir.path().join("bad.kb");
    std::fs::write(&bad, "[kb bad]\nschema f(scalar a -> scalar\n").unwrap();
    let o = run(&["validate-kb", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2:"), "{}", stderr(&o));
}
