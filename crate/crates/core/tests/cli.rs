mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bml_core::evaluation::{evaluate_design, EvalParams, SweepSettings, UncertaintyModel};
use bml_core::markets::Design;

fn bml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bml"))
        .args(args)
        .env_remove("BML_SEED")
        .output()
        .expect("bml runs")
}

fn case(name: &str) -> String {
    common::case_path(name)
}

fn stdout_paths(out: &Output) -> Vec<String> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scenario_gen_writes_requested_rows_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = case("two_zone.json");
    for out in [&a, &b] {
        let run = bml(&["scenario-gen", "--case", &c, "--n", "100", "--seed", "7", "--out", path(out)]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        assert_eq!(stdout_paths(&run)[0], path(out));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.starts_with("scenario,prob,W1,W2\n"));
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let meta = fs::read_to_string(dir.path().join("a.csv.meta")).unwrap();
    assert!(meta.contains("\"seed\":7"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let c = case("two_zone.json");
    let zero = bml(&["scenario-gen", "--case", &c, "--n", "0", "--seed", "7", "--out", path(&out)]);
    assert_eq!(zero.status.code(), Some(2));
    let no_seed = bml(&["scenario-gen", "--case", &c, "--out", path(&out)]);
    assert_eq!(no_seed.status.code(), Some(2));
    let design = bml(&["clear", "--case", &c, "--seed", "1", "--design", "nodal", "--out", path(&out)]);
    assert_eq!(design.status.code(), Some(2));
    let x = bml(&["clear", "--case", &c, "--seed", "1", "--design", "sequential", "--x", "1.5", "--out", path(&out)]);
    assert_eq!(x.status.code(), Some(2));
    let missing = bml(&["clear", "--case", "no/such/case.json", "--seed", "1", "--design", "stochastic", "--out", path(&out)]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stdout_paths(&missing).is_empty());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = case("two_zone.json");
    let env = Command::new(env!("CARGO_BIN_EXE_bml"))
        .args(["scenario-gen", "--case", &c, "--n", "5", "--out", path(&a)])
        .env("BML_SEED", "9")
        .output()
        .unwrap();
    assert!(env.status.success());
    let flag = bml(&["scenario-gen", "--case", &c, "--n", "5", "--seed", "9", "--out", path(&b)]);
    assert!(flag.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn clear_total_matches_library_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("clear.json");
    let c = case("micro.json");
    let run = bml(&[
        "clear", "--case", &c, "--n", "8", "--seed", "5", "--requirement-samples", "10000",
        "--design", "stochastic", "--out", path(&out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let total = json["outcome"]["costs"]["total"].as_f64().unwrap();

    let net = common::load_case("micro.json");
    let settings = SweepSettings {
        seed: 5,
        scenarios: 8,
        requirement_samples: 10_000,
        ..SweepSettings::default()
    };
    let model = UncertaintyModel::new(&net, &settings).unwrap();
    let (scen, requirements) = model.at(&net).unwrap();
    let run = evaluate_design(&net, &scen, Design::Stochastic, &EvalParams { requirements }).unwrap();
    assert_eq!(total, run.costs.total);
    assert_eq!(json["outcome"]["balancing"].as_array().unwrap().len(), 8);
}

#[test]
fn clear_reports_cross_border_limit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seq.json");
    let run = bml(&[
        "clear", "--case", &case("micro.json"), "--n", "4", "--seed", "5",
        "--requirement-samples", "10000", "--design", "sequential", "--x", "0.15", "--out", path(&out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let uses = json["outcome"]["reserve"]["allocation"]["ByArea"]["cross_border"].as_array().unwrap();
    assert_eq!(uses.len(), 2);
    for u in uses {
        assert_eq!(u["limit"].as_f64().unwrap(), 30.0);
    }
}

#[test]
fn clear_failure_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seq.json");
    let run = bml(&[
        "clear", "--case", &case("micro.json"), "--n", "4", "--seed", "5",
        "--requirement-samples", "10000", "--design", "sequential", "--x", "1", "--out", path(&out),
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("energy-only day-ahead"));
    assert!(!out.exists());
}

fn sweep_args<'a>(extra: &[&'a str], workers: &'a str, out: &'a str, c: &'a str) -> Vec<&'a str> {
    let mut args = vec!["sweep"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&[
        "--case", c, "--n", "6", "--seed", "4", "--requirement-samples", "10000",
        "--workers", workers, "--out", out,
    ]);
    args
}

#[test]
fn penetration_sweep_spans_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pen");
    let c = case("two_zone.json");
    let run = bml(&sweep_args(&["penetration", "--max", "0.65"], "1", path(&out), &c));
    let costs = fs::read_to_string(out.join("costs.csv")).unwrap();
    assert_eq!(costs.lines().count(), 1 + 14 * 3);
    let failed = costs.lines().filter(|l| l.contains(",failed,")).count();
    assert_eq!(run.status.success(), failed == 0);
    assert_eq!(stdout_paths(&run).len(), 4);
    let pens: Vec<&str> = costs
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("stochastic,"))
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(pens.first(), Some(&"0"));
    assert_eq!(pens.last(), Some(&"0.65"));
}

#[test]
fn x_capacity_sweep_writes_locus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("xc");
    let c = case("two_zone.json");
    let run = bml(&sweep_args(
        &["x-capacity", "--penetration", "0.24", "--policy", "penalizing", "--x-step", "0.25", "--capacities", "50,200,500"],
        "1",
        path(&out),
        &c,
    ));
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let locus = fs::read_to_string(out.join("locus.csv")).unwrap();
    let rows: Vec<&str> = locus.lines().collect();
    assert_eq!(rows[0], "capacity,x,total");
    assert_eq!(rows.len(), 4);
    for row in &rows[1..] {
        let x = row.split(',').nth(1).unwrap();
        assert!(["0", "0.25", "0.5", "0.75", "1"].contains(&x), "{row}");
    }
    assert_eq!(fs::read_to_string(out.join("costs.csv")).unwrap().lines().count(), 1 + 15);
    let meta = fs::read_to_string(out.join("meta.json")).unwrap();
    assert!(meta.contains("\"scenario_seed\": 4"));
    assert!(meta.contains("\"case_sha256\": \""));
}

#[test]
fn worker_count_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    let c = case("two_zone.json");
    let mut seen = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        bml(&sweep_args(&["penetration", "--max", "0.3", "--step", "0.1"], workers, path(&out), &c));
        let files: Vec<Vec<u8>> = ["costs.csv", "locus.csv", "meta.json"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        seen.push(files);
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn export_writes_one_file_per_stage() {
    let dir = tempfile::tempdir().unwrap();
    let c = case("micro.json");
    let common_args = ["--case", c.as_str(), "--n", "3", "--seed", "2", "--requirement-samples", "10000"];
    let stoch_dir = dir.path().join("stoch");
    let mut args = vec!["export-mps", "--design", "stochastic", "--out", path(&stoch_dir)];
    args.extend_from_slice(&common_args);
    let run = bml(&args);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let files = stdout_paths(&run);
    assert_eq!(files.len(), 1);
    let mps = fs::read_to_string(&files[0]).unwrap();
    assert!(mps.contains("rUP_i0_w2"));
    assert!(mps.contains("balRT_n1_w0"));

    let seq_dir = dir.path().join("seq");
    let mut args = vec!["export-mps", "--design", "sequential", "--x", "0.15", "--out", path(&seq_dir)];
    args.extend_from_slice(&common_args);
    let run = bml(&args);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(stdout_paths(&run).len(), 3);

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let bad = blocker.join("sub");
    let mut args = vec!["export-mps", "--design", "stochastic", "--out", path(&bad)];
    args.extend_from_slice(&common_args);
    assert_eq!(bml(&args).status.code(), Some(1));
}
