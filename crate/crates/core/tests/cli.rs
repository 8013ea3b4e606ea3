use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use noisy_euler::cli::report::read_rows;

const BIN: &str = env!("CARGO_BIN_EXE_noisy-euler");

const FOUR_DELTAS: &str = r#"{
    "problem": {"name": "additive", "rho2": 0.75, "xi": 1},
    "n_list": [32, 64, 128, 256],
    "delta_list": [0, 0.001, 0.01, 0.1],
    "kind": "hashed",
    "mc_tries": 8,
    "factor": 64,
    "base_seed": 42
}"#;

fn run(args: &[&str], config: &str, dir: &Path) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    let out_dir = dir.join("out");
    Command::new(BIN)
        .args(args)
        .arg(&path)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn four_noise_levels_give_four_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["convergence"], FOUR_DELTAS, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("slope delta=")).count(), 4, "{text}");
    for d in ["0", "0.001", "0.01", "0.1"] {
        assert!(text.contains(&format!("slope delta={d}: ")), "{text}");
    }

    let rows = read_rows(fs::File::open(dir.path().join("out/convergence.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 16);
    let mut deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    deltas.dedup();
    assert_eq!(deltas, vec![0.0, 0.001, 0.01, 0.1]);
    assert!(rows.iter().filter(|r| r.delta == 0.0).all(|r| r.mc_tries == 1));
    assert!(rows.iter().filter(|r| r.delta > 0.0).all(|r| r.mc_tries == 8));

    let slopes = fs::read_to_string(dir.path().join("out/slopes.csv")).unwrap();
    assert_eq!(slopes.lines().count(), 5);
    let svg = fs::read_to_string(dir.path().join("out/convergence.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run(&["convergence", "--no-plot"], FOUR_DELTAS, dir.path());
        assert!(o.status.success());
    }
    for name in ["convergence.csv", "slopes.csv"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    assert!(!a.path().join("out/convergence.svg").exists());
}

#[test]
fn seed_flag_changes_noisy_rows_only() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(&["convergence", "--no-plot"], FOUR_DELTAS, a.path()).status.success());
    assert!(run(&["convergence", "--no-plot", "--seed", "7"], FOUR_DELTAS, b.path()).status.success());
    let ra = read_rows(fs::File::open(a.path().join("out/convergence.csv")).unwrap()).unwrap();
    let rb = read_rows(fs::File::open(b.path().join("out/convergence.csv")).unwrap()).unwrap();
    assert_eq!(ra[..4], rb[..4]);
    assert_ne!(ra[4..], rb[4..]);
}

#[test]
fn empty_grid_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["convergence"], r#"{"problem": {"name": "linear-test"}, "n_list": []}"#, dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_list"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn malformed_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["convergence"], "{ not json", dir.path());
    assert!(!o.status.success());
    assert!(!dir.path().join("out").exists());
}

fn check_values(text: &str) -> (f64, f64, f64) {
    let get = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} missing in {text}"));
        line[key.len()..].trim().parse().unwrap()
    };
    (get("K_hat:"), get("H_hat:"), get("L_hat:"))
}

#[test]
fn check_linear_test() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"problem": {"name": "linear-test"}, "check": {"R": 2, "samples": 20000, "seed": 3}}"#;
    let o = run(&["check"], cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (k, h, l) = check_values(&stdout(&o));
    assert!(k > 0.0 && k <= 1.0 + 1e-12, "{k}");
    assert!((h - 1.0).abs() < 1e-6, "{h}");
    assert!(l > 0.9 && l <= 1.0 + 1e-12, "{l}");
}

#[test]
fn check_additive_is_finite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"problem": {"name": "additive"}, "check": {"R": 5, "samples": 20000}}"#;
    let o = run(&["check"], cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (k, h, l) = check_values(&stdout(&o));
    assert!(k.is_finite() && k > 0.0);
    assert!(h.is_finite());
    assert!(l.is_finite() && l > 0.0);
}

#[test]
fn check_rejects_nonpositive_radius() {
    let dir = tempfile::tempdir().unwrap();
    for r in ["0", "-1"] {
        let cfg = format!(r#"{{"problem": {{"name": "linear-test"}}, "check": {{"R": {r}}}}}"#);
        let o = run(&["check"], &cfg, dir.path());
        assert!(!o.status.success());
        assert!(String::from_utf8_lossy(&o.stderr).contains("check.R"));
    }
}

#[test]
fn solve_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"problem": {"name": "linear-test"}, "solve": {"n": 4}}"#;
    let o = run(&["solve", "--quiet"], cfg, dir.path());
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "t,y_0");
    assert_eq!(lines.len(), 6);
    let last: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last, vec![1.0, 1.25f64.powi(4)]);
}

#[test]
fn noisy_solve_differs_and_stays_close() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"problem": {"name": "linear-test"}, "solve": {"n": 64, "delta": 0.01, "seed": 5}}"#;
    assert!(run(&["solve"], cfg, dir.path()).status.success());
    let text = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let y: f64 = text.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let exact = (1.0 + 1.0 / 64.0f64).powi(64);
    assert!(y != exact && (y - exact).abs() < 0.2, "{y} vs {exact}");
}
