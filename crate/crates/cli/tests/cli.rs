use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use robust_scatter::estimators::{self, SolverConfig};
use robust_scatter::samplers::{self, DistributionSpec};
use robust_scatter::Dataset;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robust-scatter"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("ROBUST_SCATTER_THREADS")
        .output()
        .expect("spawn")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_gaussian(dir: &Path, name: &str, n: usize, p: usize, seed: u64) -> PathBuf {
    let data = samplers::sample(&DistributionSpec::gaussian(), n, p, seed).unwrap();
    let mut text = String::new();
    for row in data.samples().row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(text, "{}", fields.join(",")).unwrap();
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn estimate_json_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_gaussian(dir.path(), "x.csv", 60, 5, 11);
    let out = dir.path().join("est.json");
    let o = run(&[
        "estimate",
        "--input",
        s(&input),
        "--kind",
        "tyler",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let data = Dataset::read_csv_path(&input).unwrap();
    let lib = estimators::tyler(
        &data,
        &SolverConfig::default().with_tol(1e-10).with_max_iter(500),
    )
    .unwrap();
    let v = read_json(&out);
    assert_eq!(v["kind"], "TE");
    assert_eq!(v["p"], 5);
    assert_eq!(v["n"], 60);
    assert_eq!(v["converged"], true);
    assert_eq!(floats(&v["weights"]), lib.weights);
    for (i, row) in v["matrix"].as_array().unwrap().iter().enumerate() {
        let expected: Vec<f64> = lib.matrix.as_matrix().row(i).iter().copied().collect();
        assert_eq!(floats(row), expected);
    }
    let meta = read_json(&dir.path().join("est.json.meta.json"));
    assert_eq!(meta["command"], "estimate");
    assert_eq!(meta["config"]["tol"], 1e-10);
}

#[test]
fn estimate_csv_writes_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_gaussian(dir.path(), "x.csv", 40, 4, 12);
    let out = dir.path().join("s.csv");
    let o = run(&[
        "estimate",
        "--input",
        s(&input),
        "--kind",
        "mre",
        "--alpha",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split(',').count() == 4));
}

#[test]
fn estimate_without_out_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_gaussian(dir.path(), "x.csv", 30, 3, 13);
    let o = run(&["estimate", "--input", s(&input), "--kind", "me"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "ME");
    assert_eq!(v["u"], "rational");
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> (String, Value) {
    let out = dir.join(name);
    let mut args = vec![
        "simulate",
        "--kind",
        "te",
        "--dims",
        "8,16,24,32",
        "--reps",
        "4",
        "--seed",
        "42",
        "--out",
    ];
    args.push(s(&out));
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = read_json(&dir.join(format!("{name}.meta.json")));
    (fs::read_to_string(&out).unwrap(), meta)
}

#[test]
fn simulate_writes_table_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, meta) = simulate(dir.path(), "w.csv", &[]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "p,n,linf_mean,linf_stderr,rmse_mean,rmse_stderr");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("8,16,"));
    assert!(meta["summary"]["slope_linf"].as_f64().unwrap().is_finite());
    assert!(meta["summary"]["slope_rmse"].as_f64().unwrap().is_finite());
    assert_eq!(
        meta["summary"]["rows"][0]["seeds"]
            .as_array()
            .unwrap()
            .len(),
        4
    );
    assert_eq!(meta["config"]["seed"], 42);
}

#[test]
fn simulate_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = simulate(dir.path(), "a.csv", &["--threads", "1"]);
    let (b, _) = simulate(dir.path(), "b.csv", &["--threads", "2"]);
    let (c, _) = simulate(dir.path(), "c.csv", &[]);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn simulate_reads_toml_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("dist.toml"),
        "[distribution]\nfamily = \"elliptical\"\nradial = \"pareto:3\"\n",
    )
    .unwrap();
    let cfg = dir.path().join("dist.toml");
    let (csv, meta) = simulate(dir.path(), "e.csv", &["--config", s(&cfg)]);
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(meta["config"]["distribution"]["family"], "elliptical");

    fs::write(&cfg, "[distribution]\nfamily = \"gaussian\"\nbogus = 1\n").unwrap();
    let out = dir.path().join("bad.csv");
    let o = run(&[
        "simulate",
        "--seed",
        "1",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn master_eq_reports_tyler_predicted_weight() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let o = run(&[
        "master-eq",
        "--kind",
        "tre",
        "--alpha",
        "1",
        "--gamma",
        "0.5",
        "--p",
        "40",
        "--reps",
        "60",
        "--seed",
        "7",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    let d = v["d_star"].as_f64().unwrap();
    assert_eq!(v["predicted_weight"].as_f64().unwrap(), 1.0 / d);
    assert_eq!(v["n"], 80);
    assert!((v["q_target"].as_f64().unwrap() - 1.0 / 1.5).abs() < 1e-12);
    assert!(v["bracket"][0].as_f64().unwrap() <= d && d <= v["bracket"][1].as_f64().unwrap());
}

#[test]
fn sparse_cov_and_clime_report_errors_against_truth() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_gaussian(dir.path(), "x.csv", 200, 6, 14);
    let eye: String = (0..6)
        .map(|i| {
            (0..6)
                .map(|j| if i == j { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect();
    let truth = dir.path().join("eye.csv");
    fs::write(&truth, eye).unwrap();

    let out = dir.path().join("sc.json");
    let o = run(&[
        "sparse-cov",
        "--input",
        s(&input),
        "--truth",
        s(&truth),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = read_json(&dir.path().join("sc.json.meta.json"));
    assert_eq!(meta["summary"]["method"], "threshold");
    assert!(
        meta["summary"]["error_vs_truth"]["operator_norm"]
            .as_f64()
            .unwrap()
            < 1.0
    );

    let out = dir.path().join("cl.csv");
    let o = run(&[
        "clime",
        "--input",
        s(&input),
        "--lambda",
        "0.1",
        "--truth",
        s(&truth),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 6);
    let meta = read_json(&dir.path().join("cl.csv.meta.json"));
    assert_eq!(meta["summary"]["method"], "clime");
    assert_eq!(meta["config"]["lambda"], 0.1);
}

#[test]
fn diagnose_reports_all_sections() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_gaussian(dir.path(), "x.csv", 80, 10, 15);
    let o = run(&["diagnose", "--input", s(&input)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["te_existence"], true);
    assert!(v["quadratic_forms"]["max_identity_error"].as_f64().unwrap() < 1e-8);
    assert!(v["stieltjes"]["limit"].as_f64().unwrap() > 1.0);
    assert!(v["eigenvalues"]["min"].as_f64().unwrap() > 0.0);

    let wide = write_gaussian(dir.path(), "w.csv", 5, 10, 16);
    let o = run(&["diagnose", "--input", s(&wide)]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["te_existence"], false);
    assert!(v["quadratic_forms"].is_null());
}

fn error_report(o: &Output) -> Value {
    let line = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(line.lines().last().unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_gaussian(dir.path(), "x.csv", 30, 3, 17);

    assert_eq!(
        run(&["estimate", "--input", s(&input), "--frobnicate"])
            .status
            .code(),
        Some(1)
    );

    let o = run(&[
        "estimate",
        "--input",
        s(&input),
        "--out",
        s(&dir.path().join("x.txt")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_report(&o)["code"], "usage");

    let out = dir.path().join("e.json");
    let o = run(&[
        "estimate",
        "--input",
        s(&dir.path().join("missing.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_report(&o)["code"], "io");
    assert_eq!(
        read_json(&dir.path().join("e.json.error.json"))["exit_status"],
        1
    );
    assert!(!out.exists());

    let o = run(&["estimate", "--input", s(&input), "--kind", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(
        run(&["--threads", "0", "diagnose", "--input", s(&input)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_gaussian(dir.path(), "x.csv", 50, 4, 18);
    let out = dir.path().join("nc.json");
    let o = run(&[
        "estimate",
        "--input",
        s(&input),
        "--max-iter",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["code"], "not_converged");
    assert_eq!(
        read_json(&dir.path().join("nc.json.error.json"))["code"],
        "not_converged"
    );

    // Rank-3 proxy in dimension 6: S w = e_j cannot be met to within 1e-9.
    let thin = write_gaussian(dir.path(), "thin.csv", 3, 6, 19);
    let o = run(&[
        "clime",
        "--input",
        s(&thin),
        "--proxy",
        "sample",
        "--lambda",
        "1e-9",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["code"], "infeasible");

    let o = run(&["estimate", "--input", s(&thin), "--kind", "tyler"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_lists_defaults() {
    let o = run(&["estimate", "--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[default: tyler]"));
    assert!(text.contains("[default: 500]"));
    let o = run(&["simulate", "--help"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[default: 64,128,256,512]"));
    assert!(run(&["--version"]).status.success());
}
