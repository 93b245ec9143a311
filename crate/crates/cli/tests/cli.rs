use std::path::Path;
use std::process::{Command, Output};

fn fou(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fou"))
        .args(args)
        .env_remove("FOU_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn constants_emit_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let o = fou(&[
        "constants", "--theta", "2", "--H", "0.55", "--sigma", "1", "--x0", "1",
        "--rel-tol", "1e-5", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for k in [
        "c0", "c2", "c3_prime", "c3", "G", "C_cap", "b_inf", "lambda", "kappa", "tau", "c1",
        "c11_plus", "c12_plus", "q", "beta_at_theta", "H", "theta", "sigma", "x0",
    ] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert_eq!(v["q"], 0.5);
    assert_eq!(v["lambda"], 0.525);
    let text = read(&csv);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());

    // Above the seam c₃ is absent: null in JSON, empty in the CSV row.
    let o = fou(&["constants", "--theta", "2", "--H", "0.7", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["c3"].is_null());
    assert!(read(&csv).lines().nth(1).unwrap().contains(",,"));
}

#[test]
fn density_grid_rows() {
    let o = fou(&["density", "--H", "0.7", "--T", "100", "--theta", "2", "--grid", "-4:4:401"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,normal_pdf,expansion_pdf,expansion_plus_pdf"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 401);
    assert_eq!((rows[0][0], rows[200][0], rows[400][0]), (-4.0, 0.0, 4.0));
    // Even density above the seam.
    assert_eq!(rows[100][2], rows[300][2]);
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    let p = path.to_str().unwrap();
    let o = fou(&["simulate", "--theta", "2", "--H", "0.6", "--T", "200", "--seed", "5", "--out", p]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&path);
    assert!(text.starts_with("t,value\n0,0\n"));
    assert_eq!(text.lines().count(), 8192 + 2);

    let o = fou(&["estimate", "--H", "0.6", "--input", p]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let est = v["theta_tilde"].as_f64().unwrap();
    assert!((est - 2.0).abs() < 0.6, "{est}");
    assert_eq!(v["theta_hat"], v["theta_tilde"]);
    assert_eq!(v["clipped"], false);
    assert_eq!(v["T"], 200.0);

    std::fs::write(&path, "t,value\n0,1\n1,2\n3,1\n").unwrap();
    assert_eq!(code(&fou(&["estimate", "--H", "0.6", "--input", p])), 2);
}

#[test]
fn figure_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, threads: &str| {
        let o = fou(&[
            "reproduce-figure", "--id", "5", "--reps", "200", "--seed", "7",
            "--threads", threads, "--out-dir", dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(a.path(), "1");
    run(b.path(), "3");
    for f in ["summary.json", "histogram.csv", "overlay.csv", "scaled_errors.csv", "overlay.svg"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    let s: serde_json::Value = serde_json::from_str(&read(&a.path().join("summary.json"))).unwrap();
    assert_eq!((s["H"].as_f64(), s["T"].as_f64(), s["theta"].as_f64()), (Some(0.7), Some(100.0), Some(2.0)));
    let hist = read(&a.path().join("histogram.csv"));
    assert!(hist.starts_with("bin_lo,bin_hi,count,density\n"));
    let total: u64 = hist.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, s["samples"].as_u64().unwrap());
    assert!(read(&a.path().join("overlay.csv"))
        .starts_with("x,empirical_kde,normal_pdf,expansion_pdf,expansion_plus_pdf\n"));
    assert!(read(&a.path().join("overlay.svg")).starts_with("<svg"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"theta": 2, "H": 0.7, "T": 100, "grid": "-2:2:5"}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let o = fou(&["density", "--config", c]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 6);
    let o = fou(&["density", "--config", c, "--grid", "-1:1:3"]);
    assert_eq!(stdout(&o).lines().count(), 4);
    assert_eq!(stdout(&o), stdout(&fou(&["density", "--config", c, "--grid", "-1:1:3"])));

    std::fs::write(&cfg, r#"{"theta": 2, "H": 0.7, "T": 100, "gird": "-2:2:5"}"#).unwrap();
    assert_eq!(code(&fou(&["density", "--config", c])), 2);
}

#[test]
fn invalid_configurations_exit_2() {
    let cases: &[&[&str]] = &[
        &["density", "--H", "0.8", "--T", "100", "--theta", "2"],
        &["density", "--H", "0.7", "--T", "-1", "--theta", "2"],
        &["density", "--H", "0.7", "--T", "100", "--theta", "2", "--grid", "1:0:5"],
        &["constants", "--theta", "0", "--H", "0.6"],
        &["constants", "--theta", "2", "--H", "0.6", "--beta", "sideways"],
        &["constants", "--theta", "2", "--H", "0.6", "--rel-tol", "-1"],
        &["mc", "--theta", "2", "--H", "0.6", "--T", "50", "--reps", "5"],
        &["reproduce-figure", "--id", "9"],
        &["reproduce-figure", "--id", "1", "--theta", "3"],
        &["simulate", "--theta", "2", "--H", "0.6"],
        &["estimate", "--H", "0.6", "--input", "/nonexistent/path.csv"],
        &["density", "--threads", "0", "--H", "0.7", "--T", "100", "--theta", "2"],
        &["no-such-command"],
        &["density", "--H", "abc"],
    ];
    for args in cases {
        let o = fou(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn numerical_failure_exits_3() {
    let o = fou(&["verify-constants", "--thetas", "2", "--hs", "0.6", "--max-subdivisions", "1", "--rel-tol", "1e-12"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verification_tables() {
    let o = fou(&["verify-constants", "--thetas", "1,2", "--hs", "0.6,0.7", "--rel-tol", "1e-6"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,H,c0_closed,c0_quad,rel_err"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let err: f64 = r.split(',').nth(4).unwrap().parse().unwrap();
        assert!(err < 1e-4, "{r}");
    }

    let o = fou(&["verify-gamma", "--thetas", "2", "--hs", "0.7", "--horizons", "200,400"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("theta,H,T,gamma2,c0,c2,residual_ratio\n"));
    for r in text.lines().skip(1) {
        let ratio: f64 = r.split(',').nth(6).unwrap().parse().unwrap();
        assert!((ratio - 1.0).abs() < 0.2, "{r}");
    }
}
