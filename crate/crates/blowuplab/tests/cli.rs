use blowuplab::cli::dispatch_args;
use blowuplab::evolve::nonlinearity;
use blowuplab::linop::{CollocationGrid, GridFunctionPair, LinopError};
use blowuplab::verify::{verify_suite_with, Level};
use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str], out: &Path) -> i32 {
    dispatch_args(args.iter().copied(), Some(out.to_path_buf()))
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(String::from).collect()
}

#[test]
fn profile_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    assert_eq!(run(&["profile", "--alpha", "3", "--beta", "inf", "--samples", "201"], &d), 0);
    let text = fs::read_to_string(d.join("profile.csv")).unwrap();
    assert!(text.starts_with("y,tildeU,dtildeU,H\n"));
    let rows = data_rows(&d.join("profile.csv"));
    assert_eq!(rows.len(), 201);
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(first[0], "-1.0000000000000000e0");
    assert!(d.join("config.json").exists());
}

#[test]
fn scan_has_no_smooth_points_off_the_symmetry_modes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["scan-modes", "--alpha", "3", "--re", "-0.9:3", "--im", "-3:3", "--grid", "20x20"];
    assert_eq!(run(&args, dir.path()), 0);
    let rows = data_rows(&dir.path().join("scan.csv"));
    assert_eq!(rows.len(), 400);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("false")));
}

#[test]
fn invalid_alpha_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_blowuplab"))
        .args(["profile", "--alpha", "-1", "--out"])
        .arg(dir.path())
        .env_remove("BLOWUPLAB_OUT")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("alpha > 0"), "{err}");
    assert!(!dir.path().join("profile.csv").exists());
}

#[test]
fn numerical_failure_exits_two_with_error_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_blowuplab"))
        .args(["lightcone", "--cells", "64", "--cfl", "0.5", "--out"])
        .arg(dir.path())
        .env_remove("BLOWUPLAB_OUT")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("CFLViolation"));
}

#[test]
fn environment_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("env");
    let flag_dir = dir.path().join("flag");
    let status = Command::new(env!("CARGO_BIN_EXE_blowuplab"))
        .args(["profile", "--samples", "5", "--out"])
        .arg(&flag_dir)
        .env("BLOWUPLAB_OUT", &env_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(env_dir.join("profile.csv").exists());
    assert!(!flag_dir.exists());
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["evolve-nonlinear", "--s-max", "1", "--seeds", "2,5", "--jobs", "2"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&args, &a), 0);
    assert_eq!(run(&args, &b), 0);
    for name in ["trace_seed2.csv", "trace_seed5.csv", "summary_seed2.json", "summary_seed5.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let echo_a = fs::read_to_string(a.join("config.json")).unwrap();
    let echo_b = fs::read_to_string(b.join("config.json")).unwrap();
    assert_eq!(echo_a.replace(a.to_str().unwrap(), ""), echo_b.replace(b.to_str().unwrap(), ""));
    let entries: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(entries.iter().all(|n| !n.ends_with(".tmp")), "{entries:?}");
}

#[test]
fn echo_materializes_defaults_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["evolve-linear", "--s-max", "0.5", "--seed", "42", "--mode", "random"], dir.path()), 0);
    let echo: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["seed"], 42);
    let dt = echo["params"]["config"]["dt"].as_f64().unwrap();
    assert_eq!(dt, blowuplab::evolve::default_dt(32));
    assert_eq!(echo["params"]["config"]["grid_N"], 32);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"alpha": 8, "samples": 11, "beta": 0}"#).unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["profile", "--config", cfg.to_str().unwrap(), "--samples", "7"], &out), 0);
    assert_eq!(data_rows(&out.join("profile.csv")).len(), 7);
    let echo: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["params"]["profile"]["alpha"], 8.0);
    assert_eq!(echo["params"]["profile"]["beta"], "zero");
    fs::write(&cfg, "{not json").unwrap();
    assert_eq!(run(&["profile", "--config", cfg.to_str().unwrap()], &out), 1);
}

#[test]
fn spectrum_report_fields() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["spectrum", "--alpha", "3", "--N", "24", "--eigenvectors"], dir.path()), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(v["N"], 24);
    assert_eq!(v["k_norm"], 2);
    let eig = v["eigenvalues"].as_array().unwrap();
    assert_eq!(eig.len(), 50);
    assert!(eig.iter().all(|e| e["re"].is_f64() && e["im"].is_f64() && e["residual"].is_f64() && e["class"].is_string()));
    assert_eq!(eig[0]["class"], "mode_one");
    assert_eq!(data_rows(&dir.path().join("eigenvectors.csv")).len(), 3 * 25);
}

#[test]
fn fast_verification_passes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify", "--level", "fast"], dir.path()), 0);
}

fn flipped(grid: &CollocationGrid, q: &GridFunctionPair<f64>) -> Result<GridFunctionPair<f64>, LinopError> {
    Ok(nonlinearity(grid, q)?.scaled(-1.0))
}

#[test]
fn sign_mutation_is_caught_by_the_first_check() {
    let results = verify_suite_with(Level::Fast, flipped);
    let first = results.iter().find(|r| !r.passed).expect("mutation must fail a check");
    assert_eq!(first.name, "nonlinearity homogeneity and sign");
    assert_eq!(first.name, results[0].name);
}
