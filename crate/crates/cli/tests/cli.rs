use std::path::Path;
use std::process::Command;

use ltl_cli::config::{Environment, ExperimentConfig, Method, RawConfig};
use ltl_cli::runner::{run_experiment, MANIFEST_FILE};
use ltl_core::evaluation::LearningCurve;

fn ltl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ltl"))
}

fn small(extra: &str) -> RawConfig {
    let base = "t_train = 8\nt_val = 4\nt_test = 4\nn_test = 20\n\
                lambda_grid = \"1e-2:1e1:3\"\ngamma_grid = \"1e-2:1e1:3\"\n";
    let mut raw = RawConfig::from_toml(&format!("{base}{extra}"), "test").unwrap();
    raw.runs = raw.runs.or(Some(2));
    raw
}

#[test]
fn itl_with_one_run_writes_a_single_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::resolve(
        small("runs = 1\nmethods = [\"ITL-SGD\"]"),
        Environment::SynthReg,
    )
    .unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.files, vec![dir.path().join("ITL-SGD.csv")]);
    let curve = LearningCurve::read_csv(std::fs::File::open(&out.files[0]).unwrap()).unwrap();
    // ITL ignores the training stream, so every horizon sees the same error
    let first = curve.points[0].mean_error;
    assert!(curve.points.iter().all(|p| p.mean_error == first));
    assert!(curve
        .points
        .iter()
        .all(|p| p.std_error == 0.0 && p.gamma.is_none()));
    assert_eq!(curve.horizons(), (1..=8).collect::<Vec<_>>());
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let mut cfg = ExperimentConfig::resolve(small("seed = 3"), Environment::SynthCls).unwrap();
        cfg.output_dir = dir.path().join(name);
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.files.len(), Method::ALL.len());
        let mut all: Vec<Vec<u8>> = out
            .files
            .iter()
            .map(|f| std::fs::read(f).unwrap())
            .collect();
        all.push(std::fs::read(&out.manifest).unwrap());
        bytes.push(all);
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn every_method_produces_a_full_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg =
        ExperimentConfig::resolve(small("eval_every = 3"), Environment::SynthReg).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let out = run_experiment(&cfg).unwrap();
    let names: Vec<_> = out.curves.iter().map(|c| c.method.as_str()).collect();
    assert_eq!(
        names,
        Method::ALL.iter().map(|m| m.name()).collect::<Vec<_>>()
    );
    for c in &out.curves {
        assert_eq!(c.horizons(), vec![3, 6, 8], "{}", c.method);
        assert!(c.points.iter().all(|p| p.mean_error.is_finite()));
        let ltl = c.method.starts_with("LTL");
        assert!(c.points.iter().all(|p| p.gamma.is_some() == ltl));
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let err = RawConfig::from_toml("t_trian = 5", "typo.toml").unwrap_err();
    assert!(err.to_string().contains("t_trian"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "lambda = 1.0\n").unwrap();
    let out = ltl()
        .args(["synth-reg", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

fn run_cli(args: &[&str], out: &Path) -> String {
    let o = ltl().args(args).arg("--out").arg(out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn binary_runs_and_reruns_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let stdout = run_cli(
        &[
            "synth-reg",
            "--runs",
            "1",
            "--t-train",
            "6",
            "--t-val",
            "3",
            "--t-test",
            "3",
            "--methods",
            "ITL-SGD,LTL-SGD-SGD",
            "--lambda-grid",
            "0.01:10:3",
            "--gamma-grid",
            "0.01:10:3",
            "--threads",
            "1",
        ],
        &a,
    );
    assert!(stdout.contains("LTL-SGD-SGD") && stdout.contains("manifest"));
    let manifest = a.join(MANIFEST_FILE);
    run_cli(&["synth-reg", "--config", manifest.to_str().unwrap()], &b);
    for f in ["ITL-SGD.csv", "LTL-SGD-SGD.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap()
        );
    }
}

#[test]
fn certify_reports_every_check() {
    let o = ltl()
        .args(["certify", "--seed", "5", "--scale", "0.05"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(
        stdout.lines().filter(|l| l.starts_with("PASS")).count(),
        6,
        "{stdout}"
    );
}

#[test]
fn ratings_rejects_oracle_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    std::fs::write(&csv, "task_id,x1,rating\na,1,3\n").unwrap();
    let o = ltl()
        .args(["ratings", "--methods", "MEAN-SGD", "--ratings"])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MEAN-SGD"));
}
