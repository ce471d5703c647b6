//! Command-line acceptance: exit codes, report files, and the negative
//! controls. Run with `-- --nocapture` to see the per-criterion PASS lines.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn varinv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varinv"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn read_json(dir: &Path, rel: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(rel)).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn c9_negative_controls() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // F(x) = x^2 with target -1: the only critical point of the residual
    // functional sits at the origin with residual 1 and a surviving second
    // derivative.
    let cfg = write_config(
        dir,
        "square.json",
        r#"{ "problem": "square", "target": -1.0 }"#,
    );
    let out = varinv(&["--config", &cfg, "--out", "sq", "--quiet", "invert"], dir);
    assert_eq!(exit_code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir, "sq/report.json");
    assert_eq!(report["result"]["status"], "HypothesisViolated");
    assert_eq!(report["result"]["certified"], false);

    // The bounded map fails the coercivity probe.
    let cfg = write_config(
        dir,
        "bounded.json",
        r#"{ "problem": "arctan-bounded", "target": 2.0 }"#,
    );
    let out = varinv(&["--config", &cfg, "--out", "bd", "--quiet", "probe"], dir);
    assert_eq!(exit_code(&out), 5);
    let report = read_json(dir, "bd/report.json");
    assert_eq!(report["result"]["passed"], false);
    assert_eq!(report["result"]["growth"]["coercive_flag"], false);
    assert_eq!(report["result"]["ps"]["violation_found"], true);

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "criterion 9 exceeded 5 s: {elapsed:.2}");
    println!("[ACCEPTANCE] C9 negative-controls: PASS (exit 3 and exit 5; {elapsed:.2}s)");
}

#[test]
fn invert_exit_codes_and_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "q.json",
        r#"{ "problem": "quintic1d", "target": 2.0, "solver": { "seed": 7 } }"#,
    );
    let out = varinv(&["--config", &cfg, "--out", "q", "--quiet", "invert"], dir);
    assert_eq!(exit_code(&out), 0);
    let report = read_json(dir, "q/report.json");
    assert_eq!(report["result"]["status"], "Converged");
    assert_eq!(report["result"]["certified"], true);
    let solution: f64 = report["result"]["solution"][0].as_f64().unwrap();
    assert!((solution - 1.0).abs() < 1e-8);
    // Trace rows carry the header and non-increasing phi.
    let trace = std::fs::read_to_string(dir.join("q/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,phi,grad_norm"));
    let phis: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(phis.windows(2).all(|w| w[1] <= w[0]));
    // Solution file has one scalar per line.
    let sol = std::fs::read_to_string(dir.join("q/solution.txt")).unwrap();
    assert_eq!(sol.lines().count(), 1);

    // Zero target from the degenerate origin.
    let cfg = write_config(dir, "q0.json", r#"{ "problem": "quintic1d", "target": 0.0 }"#);
    let out = varinv(&["--config", &cfg, "--out", "q0", "--quiet", "invert"], dir);
    assert_eq!(exit_code(&out), 0);
    let report = read_json(dir, "q0/report.json");
    let solution: f64 = report["result"]["solution"][0].as_f64().unwrap();
    assert!(solution.abs() < 1e-9);
}

#[test]
fn invert_hammerstein_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // K = 1, x* = 1 gives the constant target 1.
    let cfg = write_config(
        dir,
        "h.json",
        r#"{
            "problem": "hammerstein",
            "target": 1.0,
            "solver": { "tol_res": 1e-11 },
            "hammerstein": { "kernel": "constant", "grid_n": 16,
                             "rule": "trapezoid", "perturbation": "zero" }
        }"#,
    );
    let out = varinv(&["--config", &cfg, "--out", "h", "--quiet", "invert"], dir);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir, "h/report.json");
    assert_eq!(report["result"]["status"], "Converged");
    for v in report["result"]["solution"].as_array().unwrap() {
        assert!((v.as_f64().unwrap() - 1.0).abs() < 1e-7);
    }
}

#[test]
fn audit_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "g.json", r#"{ "problem": "cube-minus-x" }"#);

    // Genuine collision, consistent with the failed hypothesis.
    let out = varinv(
        &["--config", &cfg, "--out", "a", "--quiet", "audit", "--x1", "0", "--x2", "1"],
        dir,
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir, "a/report.json");
    assert_eq!(report["result"]["outcome"], "CollisionConsistent");
    let value = report["result"]["critical_value"].as_f64().unwrap();
    assert!((value - 2.0 / 27.0).abs() < 1e-6);

    // Identical points are rejected as input.
    let out = varinv(
        &["--config", &cfg, "--out", "b", "--quiet", "audit", "--x1", "0.5", "--x2", "0.5"],
        dir,
    );
    assert_eq!(exit_code(&out), 1);

    // Distinct values: not a collision.
    let cfg = write_config(dir, "q.json", r#"{ "problem": "quintic1d" }"#);
    let out = varinv(
        &["--config", &cfg, "--out", "c", "--quiet", "audit", "--x1", "-1", "--x2", "1"],
        dir,
    );
    assert_eq!(exit_code(&out), 0);
    let report = read_json(dir, "c/report.json");
    assert_eq!(report["result"]["outcome"], "NotACollision");
    assert!((report["result"]["gap"].as_f64().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn probe_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "p.json", r#"{ "problem": "planar", "target": [1.0, 1.0] }"#);
    let out = varinv(&["--config", &cfg, "--out", "p", "--quiet", "probe"], dir);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let growth = read_json(dir, "p/growth.json");
    let exponent = growth["min_exponent"].as_f64().unwrap();
    assert!((exponent - 10.0).abs() < 0.5, "exponent {exponent}");
    assert!(dir.join("p/ps_probe.json").exists());

    let cfg = write_config(dir, "l.json", r#"{ "problem": "linear", "target": 0.0 }"#);
    let out = varinv(&["--config", &cfg, "--out", "l", "--quiet", "probe"], dir);
    assert_eq!(exit_code(&out), 0);
    let growth = read_json(dir, "l/growth.json");
    assert!((growth["min_exponent"].as_f64().unwrap() - 2.0).abs() < 0.05);
}

#[test]
fn mpass_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "w.json", r#"{ "problem": "two-well" }"#);
    let out = varinv(
        &["--config", &cfg, "--out", "w", "--quiet", "mpass",
          "--anchor-a", "-1", "--anchor-b", "1"],
        dir,
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir, "w/report.json");
    assert!(report["result"]["critical_point"][0].as_f64().unwrap().abs() < 1e-6);
    assert!((report["result"]["critical_value"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!(dir.join("w/path.csv").exists());

    // The collision functional of the non-injective control: saddle level
    // 2/27 between the two preimages of zero.
    let cfg = write_config(dir, "g.json", r#"{ "problem": "cube-minus-x", "target": 0.0 }"#);
    let out = varinv(
        &["--config", &cfg, "--out", "g", "--quiet", "mpass",
          "--anchor-a", "0", "--anchor-b", "1"],
        dir,
    );
    assert_eq!(exit_code(&out), 0);
    let report = read_json(dir, "g/report.json");
    let value = report["result"]["critical_value"].as_f64().unwrap();
    assert!((value - 2.0 / 27.0).abs() < 1e-6);

    // Anchors at the same minimum: no barrier.
    let out = varinv(
        &["--config", dir.join("w.json").to_str().unwrap(), "--out", "x", "--quiet",
          "mpass", "--anchor-a", "-1", "--anchor-b", "-1"],
        dir,
    );
    assert_eq!(exit_code(&out), 6);
}

#[test]
fn demo_names() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = varinv(&["demo", "section2-scalar"], dir);
    assert_eq!(exit_code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max residual"));

    let out = varinv(&["demo", "no-such-demo"], dir);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn bad_config_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "bad.json",
        r#"{ "problem": "quintic1d", "solver": { "tol_res": -1.0 } }"#,
    );
    let out = varinv(&["--config", &cfg, "--out", "o", "--quiet", "invert"], dir);
    assert_eq!(exit_code(&out), 1);

    let cfg = write_config(dir, "unknown.json", r#"{ "problem": "no-such-map" }"#);
    let out = varinv(&["--config", &cfg, "--out", "o", "--quiet", "invert"], dir);
    assert_eq!(exit_code(&out), 1);

    // Missing --config.
    let out = varinv(&["invert"], dir);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "p.json",
        r#"{ "problem": "planar", "target": [2.0, -1.0], "solver": { "seed": 11 } }"#,
    );
    for out_dir in ["r1", "r2"] {
        let out = varinv(&["--config", &cfg, "--out", out_dir, "--quiet", "invert"], dir);
        assert_eq!(exit_code(&out), 0);
    }
    for file in ["report.json", "trace.csv", "solution.txt"] {
        let a = std::fs::read(dir.join("r1").join(file)).unwrap();
        let b = std::fs::read(dir.join("r2").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // The seed flag overrides the config and is echoed in the report.
    let out = varinv(
        &["--config", &cfg, "--out", "r3", "--quiet", "--seed", "99", "invert"],
        dir,
    );
    assert_eq!(exit_code(&out), 0);
    let report = read_json(dir, "r3/report.json");
    assert_eq!(report["config"]["solver"]["seed"], 99);
    assert_eq!(report["result"]["seed"], 99);
}
