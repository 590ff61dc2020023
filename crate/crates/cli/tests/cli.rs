use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use collapse_core::spin::SpinModelParams;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn lab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_collapse-lab"));
    cmd.args(args).env_remove("COLLAPSE_LAB_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_fixture(cmd: &str, name: &str, out: &Path, extra: &[&str], envs: &[(&str, &str)]) -> Output {
    let cfg = fixture(name);
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lab(&args, envs)
}

fn summary(data: &Path) -> Value {
    let path = data.with_file_name(format!("{}.summary.json", data.file_stem().unwrap().to_string_lossy()));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_lambda_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("spin", "missing_lambda.toml", &dir.path().join("x.csv"), &[], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("lambda"), "{}", stderr(&o));
}

#[test]
fn negative_lambda_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("collapse", "negative_lambda.toml", &dir.path().join("x.csv"), &[], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "experiment = \"spin\"\n[spin]\nepsilon = 1.0\nsigma = 1e-3\nt_cal = 1.0\nlamda = 2.0\n\
         s = { min = 0.0, max = 1.0, points = 3 }\n",
    )
    .unwrap();
    let o = lab(&["validate", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));
}

#[test]
fn wrong_subcommand_for_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("decay", "spin_window.toml", &dir.path().join("x.csv"), &[], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(lab(&["spin"], &[]).status.code(), Some(2));
    assert_eq!(lab(&["teleport", "--config", "x.toml"], &[]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_io() {
    let o = lab(&["validate", "--config", "/nonexistent/dir/cfg.toml"], &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unstable_grid_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("decay", "decay_unstable.toml", &dir.path().join("x.csv"), &[], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn validate_reports_universe_window() {
    let cfg = fixture("universe_age.toml");
    let o = lab(&["validate", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("T_cal = ")).expect("T_cal line");
    let t: f64 = line["T_cal = ".len()..].parse().unwrap();
    let expected = (5.391e-44f64 * 4.323e17).sqrt();
    assert!((t / expected - 1.0).abs() < 1e-12, "{t}");
    assert!((t - 1.5e-13).abs() < 0.05e-13);
    assert!(text.trim_end().ends_with("ok"));
}

#[test]
fn spin_envelope_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spin.csv");
    let o = run_fixture("spin", "spin_window.toml", &out, &[], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&out);
    let env = s["results"]["envelope"].as_f64().unwrap();
    let lib = SpinModelParams::symmetric(1.0, 1e-3, 3.0).unwrap().precession_damping();
    assert!((env - lib).abs() < 1e-12);
    assert!((env - (-4.5f64).exp()).abs() < 1e-6);
    let rows = std::fs::read_to_string(&out).unwrap().lines().count();
    assert_eq!(rows, 302);
}

#[test]
fn disjoint_records_have_zero_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rec.json");
    let o = run_fixture("records", "records_disjoint.toml", &out, &["--format", "json"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["results"]["bound_sup"].as_f64(), Some(0.0));
    assert_eq!(s["results"]["schwarz_chain_holds"], Value::Bool(true));
    let table: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(table["columns"][0]["name"], "t");
}

#[test]
fn summary_records_run_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = run_fixture("measurement", "measurement_plane_wave.toml", &out, &["--seed", "17"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["experiment"], "measurement");
    assert_eq!(s["seed"], 17);
    assert!(s["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert!(s["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(s["parameters"]["lambda"].is_number());
}

#[test]
fn kgrid_writes_spectrum_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.toml");
    std::fs::write(
        &cfg,
        "experiment = \"decay\"\n[decay]\nepsilon = 2.0\ngamma = 1.0\nsigma = 1e-3\nt_cal = 0.0\n\
         quantity = \"kgrid\"\nkgrid = { n_modes = 512, half_width = 40.0, s_end = 1.0, start = \"decay\" }\n",
    )
    .unwrap();
    let out = dir.path().join("k.csv");
    let o = lab(&["decay", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let spectrum = std::fs::read_to_string(dir.path().join("k.spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 513);
    assert!(summary(&out)["results"]["drift_rate"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn output_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("e{i}.csv"))).collect();
    for (p, threads) in paths.iter().zip(["1", "4", "4"]) {
        let o = run_fixture("ensemble", "ensemble.toml", p, &[], &[("COLLAPSE_LAB_THREADS", threads)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[1], bytes[2]);
}

#[test]
fn seed_changes_values_not_schema() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run_fixture("collapse", "collapse_series.toml", &a, &["--seed", "1"], &[]);
    run_fixture("collapse", "collapse_series.toml", &b, &["--seed", "2"], &[]);
    let ta = std::fs::read_to_string(&a).unwrap();
    let tb = std::fs::read_to_string(&b).unwrap();
    assert_eq!(ta.lines().next(), tb.lines().next());
    assert_eq!(ta.lines().count(), tb.lines().count());
    assert_ne!(ta, tb);
}

#[test]
fn bad_thread_count_is_rejected() {
    let cfg = fixture("spin_window.toml");
    let o = lab(&["validate", "--config", cfg.to_str().unwrap()], &[("COLLAPSE_LAB_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
}
