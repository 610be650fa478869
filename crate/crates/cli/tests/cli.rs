use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairfront::pareto_flags;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn fairfront(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairfront"))
        .args(args)
        .output()
        .expect("spawn fairfront")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const FIXTURE_CONFIG: &str = r#"{
  "dm_utility": {"lending": {"interest_rate": 0.1}},
  "ds_utility": {"base": {"u11": 10, "u10": -5, "u01": -1, "u00": 0}},
  "claims": {"outcome_equals": 1},
  "positions": "group",
  "pattern": "maximin"
}"#;

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn optimal_threshold_prints_break_even() {
    let o = fairfront(&["optimal-threshold", "--config", data("fixture4.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "0.909090909091\n");
}

#[test]
fn missing_column_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write(dir.path(), "d.csv", "score,sex,outcome\n0.5,F,1\n");
    let cfg = write(dir.path(), "c.json", FIXTURE_CONFIG);
    let o = fairfront(&["sweep", "--dataset", &ds, "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MissingColumn"), "{}", stderr(&o));
}

#[test]
fn schema_violation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &FIXTURE_CONFIG.replace("maximin", "utilitarian"));
    let o = fairfront(&["optimal-threshold", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/pattern"), "{}", stderr(&o));
}

#[test]
fn empty_position_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // nobody in M repaid, so M holds no claims
    let ds = write(dir.path(), "d.csv", "score,group,outcome\n0.9,F,1\n0.6,M,0\n");
    let cfg = write(dir.path(), "c.json", FIXTURE_CONFIG);
    let o = fairfront(&["sweep", "--dataset", &ds, "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("EmptyPosition"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn degenerate_utility_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &FIXTURE_CONFIG.replace(
            r#"{"lending": {"interest_rate": 0.1}}"#,
            r#"{"table": {"u11": 1, "u10": 1, "u01": 0, "u00": 0}}"#,
        ),
    );
    let o = fairfront(&["optimal-threshold", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("always accept"), "{}", stderr(&o));
}

#[test]
fn cap_exceeded_exits_3() {
    let o = fairfront(&[
        "sweep",
        "--dataset",
        data("fixture4.csv").to_str().unwrap(),
        "--config",
        data("fixture4.json").to_str().unwrap(),
        "--cap",
        "10000",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("SweepTooLarge"), "{}", stderr(&o));
}

#[test]
fn singleton_grid_is_its_own_front() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &FIXTURE_CONFIG.replace(
            r#""pattern": "maximin""#,
            r#""pattern": "maximin", "grid": {"explicit": {"F": [0.8], "M": [0.8]}}"#,
        ),
    );
    let o = fairfront(&[
        "sweep",
        "--dataset",
        data("fixture4.csv").to_str().unwrap(),
        "--config",
        &cfg,
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].ends_with(",true,true"), "{}", rows[1]);
}

#[test]
fn evaluate_matches_hand_calculation() {
    let o = fairfront(&[
        "evaluate",
        "--dataset",
        data("fixture4.csv").to_str().unwrap(),
        "--config",
        data("fixture4.json").to_str().unwrap(),
        "--rule",
        "u:0.8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // accepted: F 0.9 and M 0.95; dm = 0.9*0.1 - 0.1 + 0.95*0.1 - 0.05
    assert_eq!(v["dm_utility"].as_f64().unwrap(), 0.035);
    // F claims: 0.9 accepted (0.9*10 - 0.1*5 = 8.5), 0.5 rejected (0.5*-1 = -0.5) -> 4
    assert_eq!(v["position_utilities"]["F"].as_f64().unwrap(), 4.0);
    assert_eq!(v["position_utilities"]["M"].as_f64().unwrap(), 9.25);
    assert_eq!(v["fairness_score"].as_f64().unwrap(), 4.0);
    assert_eq!(v["accepted"]["F"], 1);
}

#[test]
fn reloaded_csv_reproduces_front_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = fairfront(&[
        "sweep",
        "--dataset",
        data("synthetic_credit.csv").to_str().unwrap(),
        "--config",
        data("case_study.json").to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let (dm, fair, front) = (col("dm_utility"), col("fairness_score"), col("on_front"));
    let mut pts = Vec::new();
    let mut flags = Vec::new();
    for r in rdr.records() {
        let r = r.unwrap();
        pts.push((r[dm].parse::<f64>().unwrap(), r[fair].parse::<f64>().unwrap()));
        flags.push(&r[front] == "true");
    }
    assert_eq!(pts.len(), 10_201);
    assert_eq!(pareto_flags(&pts), flags);
}

#[test]
fn pareto_writes_only_the_front_in_path_order() {
    let o = fairfront(&[
        "pareto",
        "--dataset",
        data("fixture4.csv").to_str().unwrap(),
        "--config",
        data("fixture4.json").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[6] == "true"));
    for w in rows.windows(2) {
        let dm = |r: &Vec<&str>| r[2].parse::<f64>().unwrap();
        let fair = |r: &Vec<&str>| r[3].parse::<f64>().unwrap();
        assert!(dm(&w[1]) <= dm(&w[0]) && fair(&w[1]) >= fair(&w[0]));
    }
}

#[test]
fn validate_reports_groups() {
    let o = fairfront(&[
        "validate",
        "--dataset",
        data("fixture4.csv").to_str().unwrap(),
        "--config",
        data("fixture4.json").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("groups: F, M"));
    assert!(text.contains("sweep size: 10201"));
}
