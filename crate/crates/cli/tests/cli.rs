use std::process::{Command, Output};

use serde_json::Value;

const ETA_06_NEGATIVITY: f64 = 0.21950882301396693;

fn run_with(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_picturelab"));
    cmd.args(args).env_remove("PICTURELAB_TAIL_TOL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_with(args, &[])
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn ok_text(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output, code: i32) -> Value {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(v["exit_code"], code);
    assert!(v["error"].is_string() && v["message"].is_string());
    v
}

/// Splits a CSV into its embedded config, header and data rows.
fn parse_csv(text: &str) -> (Value, Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let config = lines
        .next()
        .unwrap()
        .strip_prefix("# config: ")
        .expect("config line");
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (serde_json::from_str(config).unwrap(), header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn state_rho_s_diagonal_is_geometric() {
    let v = ok_json(&["state", "--kind", "rho_s", "--eta", "0.5", "--n-max", "12"]);
    assert_eq!(v["representation"], "density");
    assert_eq!(floats(&v["dims"]), vec![13.0, 13.0]);
    let diag = floats(&v["diagonal"]);
    for (i, p) in diag.iter().enumerate() {
        let (a, b) = (i / 13, i % 13);
        let want = if a == b {
            0.75 * 0.25f64.powi(a as i32)
        } else {
            0.0
        };
        assert!((p - want).abs() < 1e-14, "{i}: {p} vs {want}");
    }
    assert!(v["max_off_diagonal"].as_f64().unwrap() < 1e-14);
    assert_eq!(v["config"]["params"]["n_max"], 12);
    assert_eq!(v["config"]["seed"], 42);
}

#[test]
fn state_coherent_zero_is_vacuum() {
    let v = ok_json(&["state", "--kind", "coherent", "--alpha", "0"]);
    assert_eq!(v["representation"], "ket");
    let diag = floats(&v["diagonal"]);
    assert!((diag[0] - 1.0).abs() < 1e-15);
    assert!(diag[1..].iter().all(|p| *p == 0.0));
    assert!(v["deficit"].as_f64().unwrap().abs() < 1e-15);
}

#[test]
fn state_csv_round_trips_floats() {
    let args = ["state", "--kind", "rho_s", "--eta", "0.7", "--n-max", "6"];
    let v = ok_json(&args);
    let text = ok_text(&[&args[..], &["--out", "csv"]].concat());
    let (config, header, rows) = parse_csv(&text);
    assert_eq!(config["format"], "csv");
    assert_eq!(header, ["index", "occupations", "population"]);
    let diag = floats(&v["diagonal"]);
    assert_eq!(rows.len(), diag.len());
    for (row, want) in rows.iter().zip(&diag) {
        assert_eq!(row[2].parse::<f64>().unwrap().to_bits(), want.to_bits());
    }
    assert_eq!(rows[8][1], "1 1");
}

#[test]
fn oversized_state_exits_with_resource_code() {
    let v = error_json(
        &run(&["state", "--kind", "rho_t", "--m", "3", "--n-max", "8"]),
        3,
    );
    assert_eq!(v["error"], "resource");
}

#[test]
fn invalid_parameters_exit_with_usage_code() {
    error_json(&run(&["state", "--kind", "tmsv", "--eta", "1.5"]), 2);
    error_json(&run(&["state", "--kind", "nonsense"]), 2);
    error_json(&run(&["frobnicate"]), 2);
    error_json(
        &run(&["protocol", "--eta", "0.6", "--m", "6", "--experiments", "4"]),
        2,
    );
    error_json(&run(&["negativity", "--kind", "coherent"]), 2);
}

#[test]
fn help_exits_cleanly() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("bell-scan"));
}

#[test]
fn config_file_is_strict() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(
        &good,
        r#"{"state": "tmsv", "params": {"eta": 0.3, "n_max": 9}}"#,
    )
    .unwrap();
    let v = ok_json(&["state", "--config", good.to_str().unwrap()]);
    assert_eq!(floats(&v["dims"]), vec![10.0, 10.0]);

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"state": "tmsv", "params": {"eta": 0.3, "squeeze": 1}}"#,
    )
    .unwrap();
    error_json(&run(&["state", "--config", bad.to_str().unwrap()]), 2);

    let top = dir.path().join("top.json");
    std::fs::write(&top, r#"{"state": "tmsv", "extra": true}"#).unwrap();
    error_json(&run(&["state", "--config", top.to_str().unwrap()]), 2);

    error_json(
        &run(&[
            "state",
            "--config",
            dir.path().join("missing.json").to_str().unwrap(),
        ]),
        2,
    );
}

#[test]
fn tail_tolerance_comes_from_environment() {
    let out = run_with(
        &["state", "--kind", "tmsv", "--eta", "0.5"],
        &[("PICTURELAB_TAIL_TOL", "1e-4")],
    );
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["tail_tol"], 1e-4);
    let loose = v["config"]["params"]["n_max"].as_u64().unwrap();
    let tight = ok_json(&["state", "--kind", "tmsv", "--eta", "0.5"])["config"]["params"]["n_max"]
        .as_u64()
        .unwrap();
    assert!(loose < tight, "{loose} vs {tight}");

    let bad = run_with(&["qubit-demo"], &[("PICTURELAB_TAIL_TOL", "zero")]);
    error_json(&bad, 2);
}

#[test]
fn output_path_receives_the_document() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demo.json");
    let out = run(&["qubit-demo", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["config"]["output"], path.to_str().unwrap());

    let unwritable = dir.path().join("no/such/dir/out.json");
    error_json(
        &run(&["qubit-demo", "--output", unwritable.to_str().unwrap()]),
        3,
    );
}

#[test]
fn negativity_verdicts() {
    let s = ok_json(&[
        "negativity",
        "--kind",
        "rho_s",
        "--eta",
        "0.5",
        "--n-max",
        "12",
    ]);
    assert_eq!(s["status"], "separable-certified");
    assert_eq!(s["negativity"], 0.0);
    let weights: Vec<f64> = s["certificate"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["weight"].as_f64().unwrap())
        .collect();
    for (n, w) in weights.iter().enumerate() {
        assert!((w - 0.75 * 0.25f64.powi(n as i32)).abs() < 1e-14);
    }

    let t = ok_json(&[
        "negativity",
        "--kind",
        "rho_t",
        "--eta",
        "0.6",
        "--m",
        "2",
        "--n-max",
        "8",
    ]);
    assert_eq!(t["status"], "entangled-certified");
    assert!((t["negativity"].as_f64().unwrap() - ETA_06_NEGATIVITY).abs() < 1e-8);
    assert_eq!(floats(&t["cut"]["party_a"]), vec![0.0, 2.0]);

    let b = ok_json(&["negativity", "--kind", "bell"]);
    assert_eq!(b["status"], "entangled-certified");
    assert!((b["negativity"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

fn scan_rows(args: &[&str]) -> Vec<(Vec<f64>, f64)> {
    let (_, header, rows) = parse_csv(&ok_text(args));
    let chsh = column(&header, "chsh");
    let a0 = column(&header, "a0_re");
    rows.iter()
        .map(|r| {
            let settings = r[a0..a0 + 8].iter().map(|x| x.parse().unwrap()).collect();
            (settings, r[chsh].parse().unwrap())
        })
        .collect()
}

#[test]
fn bell_scan_examples() {
    let small = ["--points", "21", "--refinements", "1"];
    let tmsv = scan_rows(&[&["bell-scan", "--kind", "tmsv", "--eta", "0.6"][..], &small].concat());
    let best = tmsv.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    assert!(best > 2.16, "{best}");

    let rho_s = scan_rows(
        &[
            &["bell-scan", "--kind", "rho_s", "--eta", "0.6"][..],
            &small,
        ]
        .concat(),
    );
    assert!(rho_s.iter().all(|r| r.1 <= 2.0 + 1e-9));

    let vacuum = scan_rows(&[&["bell-scan", "--kind", "vacuum"][..], &small].concat());
    let best = vacuum.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    assert!((best - 2.0).abs() < 1e-12);
    let zero = vacuum
        .iter()
        .find(|r| r.0.iter().all(|x| *x == 0.0))
        .unwrap();
    assert!((zero.1 - 2.0).abs() < 1e-12);
}

#[test]
fn bell_scan_json_reports_best_row() {
    let v = ok_json(&[
        "bell-scan",
        "--kind",
        "tmsv",
        "--eta",
        "0.6",
        "--points",
        "11",
        "--refinements",
        "0",
        "--out",
        "json",
    ]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 121);
    let max = rows
        .iter()
        .map(|r| r["result"]["chsh_value"].as_f64().unwrap())
        .fold(f64::MIN, f64::max);
    assert_eq!(v["best"]["chsh_value"].as_f64().unwrap(), max);
    assert_eq!(v["config"]["scan"]["refinements"], 0);
}

fn curve(args: &[&str]) -> (String, Vec<(usize, f64)>) {
    let text = ok_text(args);
    let (config, header, rows) = parse_csv(&text);
    assert_eq!(
        header,
        ["m", "p_hat", "stderr", "n_experiments", "phase_model"]
    );
    assert_eq!(config["subcommand"], "protocol");
    let points = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    (text, points)
}

#[test]
fn protocol_shared_curve_is_flat_and_iid_decays() {
    let base = [
        "protocol",
        "--eta",
        "0.6",
        "--m",
        "400",
        "--m",
        "6400",
        "--experiments",
        "400",
    ];
    let (_, shared) = curve(&[&base[..], &["--phase-model", "shared"]].concat());
    assert!((shared[0].1 - shared[1].1).abs() < 0.12, "{shared:?}");
    assert!(shared[1].1 > 0.3, "{shared:?}");

    let (_, iid) = curve(&[&base[..], &["--phase-model", "iid"]].concat());
    assert!(iid[1].1 < iid[0].1, "{iid:?}");
    assert!(iid[1].1 < 0.05, "{iid:?}");
}

#[test]
fn protocol_output_is_deterministic() {
    let args = [
        "protocol",
        "--eta",
        "0.6",
        "--m",
        "40",
        "--m",
        "400",
        "--experiments",
        "64",
        "--seed",
        "7",
    ];
    let (first, _) = curve(&args);
    let (second, _) = curve(&args);
    assert_eq!(first, second);
    let (other, _) = curve(&[&args[..9], &["--seed", "8"]].concat());
    assert_ne!(first, other);
    let (config, _, _) = parse_csv(&first);
    assert_eq!(config["seed"], 7);
    assert_eq!(config["experiment"]["seed"], 7);
    assert_eq!(config["experiment"]["phase_grid"], 2048);
}

#[test]
fn protocol_fixed_phase_json() {
    let v = ok_json(&[
        "protocol",
        "--eta",
        "0.6",
        "--m",
        "1600",
        "--experiments",
        "50",
        "--phase-model",
        "fixed",
        "--phi",
        "0",
        "--out",
        "json",
    ]);
    assert_eq!(v["config"]["experiment"]["phase_model"]["kind"], "fixed");
    assert!(v["points"][0]["p_hat"].as_f64().unwrap() > 0.9);
    let window = v["phase_window"].as_f64().unwrap();
    assert!((window - 0.4458).abs() < 1e-3, "{window}");
}

#[test]
fn qubit_demo_report() {
    let v = ok_json(&["qubit-demo"]);
    let r = &v["report"];
    assert!(r["trace_distance"].as_f64().unwrap() < 1e-12);
    assert_eq!(r["equivalent"], true);
    assert!(r["reduced_negativity"].as_f64().unwrap().abs() < 1e-12);
    let rows = r["conditional"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert!((row["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-14);
        assert!((row["negativity"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn picture_check_matches_expectations() {
    let v = ok_json(&["picture-check"]);
    assert_eq!(v["all_as_expected"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks
        .iter()
        .any(|c| c["expected"] == false && c["passed"] == false));
    assert!(checks
        .iter()
        .filter(|c| c["expected"] == true)
        .all(|c| c["passed"] == true));
}

#[test]
fn every_output_embeds_its_config() {
    for args in [
        &["qubit-demo", "--out", "csv"][..],
        &["picture-check", "--out", "csv"],
        &["negativity", "--kind", "bell", "--out", "csv"],
    ] {
        let (config, _, rows) = parse_csv(&ok_text(args));
        assert_eq!(config["subcommand"], args[0]);
        assert_eq!(config["seed"], 42);
        assert!(!rows.is_empty());
    }
}
