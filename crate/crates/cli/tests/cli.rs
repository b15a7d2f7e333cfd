use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dagsobol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dagsobol"))
        .args(args)
        .env_remove("DAGSOBOL_THREADS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn read_json(p: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn validate(report: &Value) {
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let msgs: Vec<String> = match compiled.validate(report) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| e.to_string()).collect(),
    };
    assert!(msgs.is_empty(), "report does not match schema: {msgs:?}");
}

#[test]
fn simulate_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "w.csv");
    let o = dagsobol(&["simulate", "--builtin", "welding", "--m", "100", "--seed", "7", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 13);
    assert_eq!(lines.count(), 100);
    let o = dagsobol(&["simulate", "--builtin", "welding", "--m", "0", "--out", &out]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reports_match_the_schema_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "im.csv");
    let a = path(dir.path(), "a.json");
    let b = path(dir.path(), "b.json");
    let o = dagsobol(&["simulate", "--builtin", "injection_molding", "--m", "200", "--seed", "3", "--out", &csv]);
    assert!(o.status.success());
    let o = dagsobol(&["fit", "--builtin", "injection_molding", "--data", &csv, "--engine", "sn", "--p", "4", "--out", &a]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = dagsobol(&[
        "fit", "--builtin", "injection_molding", "--m", "200", "--seed", "3", "--engine", "sn", "--p", "4", "--out", &b,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (ra, rb) = (read_json(&a), read_json(&b));
    validate(&ra);
    validate(&rb);
    assert_eq!(ra["inputs"], rb["inputs"]);
    assert_eq!(ra["output_variance"], rb["output_variance"]);
    assert_eq!(ra["data"]["kind"], "csv");
    assert_eq!(ra["gamma"], 0.001);
    assert_eq!(ra["constants"]["COP"], 0.7);
}

#[test]
fn replicated_fit_carries_standard_errors_and_pareto_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "r.json");
    let svg = path(dir.path(), "p.svg");
    let csv = path(dir.path(), "p.csv");
    let o = dagsobol(&[
        "fit", "--builtin", "welding", "--m", "100", "--engine", "sn", "--reps", "8", "--seed", "2", "--out", &report,
        "--pareto", &svg, "--pareto", &csv,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&report);
    validate(&r);
    assert_eq!(r["replications"], 8);
    assert!(r["inputs"][0]["first_order_se"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("1,h,"));

    let again = path(dir.path(), "again.svg");
    let o = dagsobol(&["pareto", "--report", &report, "--out", &again]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&again).unwrap(), std::fs::read_to_string(&svg).unwrap());
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    // too few rows for the naive expansion
    let o = dagsobol(&["fit", "--builtin", "welding", "--m", "100", "--engine", "naive"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("364"), "{}", stderr(&o));

    // dataset without an intermediate column the network engine needs
    let full = path(dir.path(), "full.csv");
    assert!(dagsobol(&["simulate", "--builtin", "welding", "--m", "120", "--out", &full]).status.success());
    let text = std::fs::read_to_string(&full).unwrap();
    let cut: String = text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(11); // V
            f.join(",") + "\n"
        })
        .collect();
    let cut_path = path(dir.path(), "cut.csv");
    std::fs::write(&cut_path, cut).unwrap();
    let o = dagsobol(&["fit", "--builtin", "welding", "--data", &cut_path, "--engine", "network"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("`V`"), "{}", stderr(&o));

    assert_eq!(code(&dagsobol(&["minobs", "--builtin", "nope"])), 2);
    assert_eq!(code(&dagsobol(&["fit", "--builtin", "welding", "--engine", "sn"])), 2);
    let o = dagsobol(&["fit", "--builtin", "welding", "--m", "50", "--engine", "sn", "--p-level", "3=2"]);
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_dagsobol"))
        .args(["minobs", "--builtin", "welding"])
        .env("DAGSOBOL_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_dagsobol"))
            .args(["fit", "--builtin", "welding", "--m", "100", "--engine", "sn", "--reps", "6", "--seed", "4"])
            .env("DAGSOBOL_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn compare_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    let b = path(dir.path(), "b.csv");
    let json = path(dir.path(), "c.json");
    let args = |out: &str| {
        vec![
            "compare".to_string(), "--builtin".into(), "welding".into(), "--engines".into(), "sn,naive".into(),
            "--sizes".into(), "100,400".into(), "--reps".into(), "3".into(), "--reference-n".into(), "2000".into(),
            "--seed".into(), "5".into(), "--out".into(), out.to_string(),
        ]
    };
    let run = |out: &str, extra: &[&str]| {
        let mut v = args(out);
        v.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        dagsobol(&refs)
    };
    assert!(run(&a, &["--json", &json]).status.success());
    assert!(run(&b, &[]).status.success());
    let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(ta, tb);
    let rows: Vec<&str> = ta.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[3].starts_with("naive,100,3,3,,,"), "{}", rows[3]);
    assert!(rows[4].starts_with("naive,400,3,0,"), "{}", rows[4]);
    let doc = read_json(&json);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 4);

    let o = dagsobol(&["compare", "--builtin", "welding", "--engines", "", "--sizes", "100"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn minobs_counts() {
    let o = dagsobol(&["minobs", "--builtin", "welding", "--p", "3"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("lambda = 6/11"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let spec = path(dir.path(), "edge.json");
    std::fs::write(
        &spec,
        r#"{"spec_version":1,"name":"edge","nodes":["a","y"],"edges":[["a","y"]],
            "inputs":{"a":{"dist":"uniform","params":{"lower":0,"upper":1}}},"functions":{"y":"2*a"}}"#,
    )
    .unwrap();
    let o = dagsobol(&["minobs", "--spec", &spec, "--p", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    let counts: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("naive") || l.starts_with("network"))
        .map(|l| l.split_whitespace().last().unwrap())
        .collect();
    assert_eq!(counts, ["3", "3"]);
    assert!(text.contains("lambda = 1/1"));
}
