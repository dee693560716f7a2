use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn combgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combgen"))
        .args(args)
        .env_remove("COMBGEN_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn kingman_comb_json_keeps_levels_above_cut() {
    let out = combgen(&["kingman-comb", "--eps", "0.5", "--seed", "1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["config"]["seed"], 1);
    assert_eq!(v["window"], 1.0);
    assert_eq!(v["floor"], 0.5);
    let atoms = v["atoms"].as_array().unwrap();
    assert!(!atoms.is_empty());
    let mut prev = 0.0;
    for a in atoms {
        let (p, h) = (a[0].as_f64().unwrap(), a[1].as_f64().unwrap());
        assert!(p > prev && p < 1.0);
        assert!(h >= 0.5);
        prev = p;
    }
    let heights: Vec<f64> = atoms.iter().map(|a| a[1].as_f64().unwrap()).collect();
    let mut sorted = heights.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    assert_eq!(sorted.len(), heights.len());
}

#[test]
fn identical_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let out = combgen(&[
            "quenched", "--n", "3", "--eps", "0.01", "--reps", "50", "--seed", "9", "--threads", threads,
            "--output", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("a.jsonl", "1");
    let b = run("b.jsonl", "2");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["config"]["subcommand"], "quenched");
    assert_eq!(header["config"]["params"]["eps"], 0.01);
    let records: Vec<Value> = lines.map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 50);
    for (r, rec) in records.iter().enumerate() {
        assert_eq!(rec["replicate"], r);
        assert_eq!(rec["scheme"], "roulette");
        assert_eq!(rec["coalescence_times"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn missing_required_flag_exits_two_with_usage() {
    let out = combgen(&["kingman-comb", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn invalid_values_exit_two() {
    for args in [
        &["kingman-comb", "--eps", "-1"][..],
        &["quenched", "--n", "0", "--eps", "0.01"],
        &["cpp", "--floor", "0.1", "--intensity", "nope"],
        &["verify", "unknown-id"],
        &["quenched", "--n", "2", "--eps", "0.01", "--scheme", "nope"],
    ] {
        assert_eq!(combgen(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn exhausted_budget_exits_three() {
    let out = combgen(&["averaged", "--n", "4", "--eps", "0.001", "--budget", "5", "--reps", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_cor_final_example() {
    let out = combgen(&["verify", "cor-final", "--n", "3", "--reps", "10000", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 7);
    assert!(reports.iter().all(|r| r["seed"] == 42 && r["sample_size"] == 10000));
}

#[test]
fn output_directory_from_environment_and_ecdf() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_combgen"))
        .args(["limit", "--n", "2", "--reps", "200"])
        .env("COMBGEN_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let records = dir.path().join("limit.jsonl");
    assert!(records.exists());
    let csv = dir.path().join("sups.csv");
    let out = combgen(&[
        "ecdf", "--input", records.to_str().unwrap(), "--key", "sups", "--output", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(Path::new(&csv)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,ecdf");
    assert_eq!(lines.len(), 201);
    assert!(lines[200].ends_with(",1"));
}

#[test]
fn csv_and_report_formats() {
    let out = combgen(&["feller", "--x", "0.01", "--dt", "1e-4", "--reps", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# config: "));
    assert_eq!(text.lines().nth(1).unwrap(), "scheme,seed,replicate,dt,time,censored");
    assert_eq!(text.lines().count(), 5);

    let out = combgen(&["verify", "core-invariants", "--reps", "100", "--format", "jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| serde_json::from_str::<Value>(l).unwrap()["pass"] == true));
}

#[test]
fn fresh_seed_is_echoed() {
    let out = combgen(&["limit", "--n", "2", "--reps", "1", "--fresh-seed", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let seed = &v["config"]["seed"];
    assert!(seed.is_u64());
    assert_eq!(&v["records"][0]["seed"], seed);
}
