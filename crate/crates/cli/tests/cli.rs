use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mburgers_cli::ExperimentConfig;
use serde_json::Value;

/// Small run that still satisfies `L >= cT + 8 sqrt(M(T+1))`: T = 1, M = 8.
const SMALL: &str = r#"
[template]
M = 8.0

[grid]
L = 40.0
nx = 801

[solver]
dt = 0.02
T = 1.0
export_times = [0.0, 0.5, 1.0]
"#;

fn small_with(initial: &str) -> String {
    format!("{SMALL}\n[initial]\n{initial}\n")
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    let out = dir.join("out");
    Command::new(env!("CARGO_BIN_EXE_mburgers"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn print_defaults_is_a_loadable_config() {
    let o = Command::new(env!("CARGO_BIN_EXE_mburgers"))
        .arg("--print-defaults")
        .output()
        .unwrap();
    assert!(o.status.success());
    let cfg = ExperimentConfig::from_toml(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn simulate_zero_data_writes_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &small_with("kind = \"zero\""), &["simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    assert_eq!(s["max_abs_err"], 0.0);
    let csv = fs::read_to_string(dir.path().join("out/cole_hopf_t1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,phi_numeric,phi_exact,abs_err"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(&cols[1..], ["0", "0", "0"]);
    }
}

#[test]
fn simulate_default_grid_matches_cole_hopf() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "[initial]\nkind = \"gaussian\"\namplitude = 0.1\nwidth = 1.0\n",
        &["simulate"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    let err = s["max_abs_err"].as_f64().unwrap();
    assert!(err <= 5e-3, "max_abs_err = {err}");
    assert_eq!(s["max_abs_err_per_snapshot"].as_array().unwrap().len(), 6);
}

#[test]
fn guard_violation_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = SMALL.replace("L = 40.0", "L = 20.0");
    let o = run(dir.path(), &config, &["simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("L >= cT + 8 sqrt(M(T+1))"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn runs_are_reproducible_and_hashed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small_with("kind = \"gaussian\"\namplitude = 0.05\nwidth = 1.0");
    assert!(run(a.path(), &cfg, &["simulate"]).status.success());
    assert!(run(b.path(), &cfg, &["simulate"]).status.success());
    let sa = summary(a.path());
    let manifest = sa["manifest"].as_array().unwrap();
    assert_eq!(manifest.len(), 6);
    for entry in manifest {
        let name = entry["path"].as_str().unwrap();
        let bytes_a = fs::read(a.path().join("out").join(name)).unwrap();
        let bytes_b = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs between runs");
        assert_eq!(entry["sha256"], mburgers_core::export::sha256_hex(&bytes_a));
    }
    assert_eq!(
        fs::read(a.path().join("out/summary.json")).unwrap(),
        fs::read(b.path().join("out/summary.json")).unwrap()
    );
}

#[test]
fn decompose_zero_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &small_with("kind = \"zero\""), &["decompose"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary(dir.path())["p0"], 0.0);
    let csv = fs::read_to_string(dir.path().join("out/series.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|v| v == "0"), "{line}");
    }
}

fn p0_for(amplitude: f64) -> f64 {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_with(&format!(
        "kind = \"gaussian\"\namplitude = {amplitude}\nwidth = 1.0"
    ));
    let o = run(dir.path(), &cfg, &["decompose"]);
    assert!(o.status.success(), "{}", stderr(&o));
    summary(dir.path())["p0"].as_f64().unwrap()
}

#[test]
fn decompose_p0_is_positive_and_linear() {
    let (a, b) = (p0_for(0.05), p0_for(0.025));
    assert!(a > 0.0 && b > 0.0);
    assert!((a / b - 2.0).abs() <= 0.2, "ratio {}", a / b);
}

#[test]
fn decompose_rejects_large_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_with("kind = \"gaussian\"\namplitude = 5.0\nwidth = 1.0");
    let o = run(dir.path(), &cfg, &["decompose"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("small-amplitude"), "{}", stderr(&o));
}

#[test]
fn verify_semigroup_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), SMALL, &["verify", "--checks", "semigroup"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/semigroup.json")).unwrap())
            .unwrap();
    assert!(report["value"].as_f64().unwrap() <= 1e-6);
    assert_eq!(report["parameters"]["c"], 1.0);
    assert!(report["argmax"].is_array());
}

#[test]
fn verify_needs_known_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), SMALL, &["verify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("usage"), "{}", stderr(&o));
    let o = run(
        dir.path(),
        SMALL,
        &["verify", "--checks", "semigroup,bogus"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("available") && stderr(&o).contains("lemma_tg"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn verify_trajectory_checks_on_a_short_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_with("kind = \"gaussian\"\namplitude = 0.05\nwidth = 1.0");
    let o = run(
        dir.path(),
        &cfg,
        &["verify", "--checks", "p_identity,plateau"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    assert_eq!(s["p_identity_passed"], true);
    assert_eq!(s["plateau_passed"], true);
}

#[test]
fn convergence_zero_data_is_undefined() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &small_with("kind = \"zero\""), &["convergence"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("order undefined"));
    assert_eq!(summary(dir.path())["status"], "order undefined");
}

#[test]
fn convergence_is_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_with("kind = \"gaussian\"\namplitude = 0.1\nwidth = 1.0");
    let o = run(dir.path(), &cfg, &["convergence"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let orders = summary(dir.path())["orders"].clone();
    for o in orders.as_array().unwrap() {
        let o = o.as_f64().unwrap();
        assert!((o - 2.0).abs() < 0.3, "order {o}");
    }
}
