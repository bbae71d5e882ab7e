use std::path::Path;
use std::process::Command;

fn rate_lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rate-lab"))
}

const CONFIG: &str = r#"
density = "std-normal-d1"
ladder = [20, 30, 40, 50]
replications = 3
seed = 11
bootstrap_resamples = 200

[chain]
iterations = 300
burn_in = 100
thin = 2
truncation = 8
"#;

fn run_experiment(config: &Path, out: &Path, workers: &str) {
    let status = rate_lab()
        .args(["experiment", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--workers", workers])
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn rates_prints_the_formula() {
    let out = rate_lab()
        .args(["rates", "--beta", "2", "--dim", "1", "--kappa", "2", "--tau", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["d_star"], 2.0);
    assert!((v["exponent"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn unbalanced_anisotropy_is_an_error() {
    let out = rate_lab()
        .args(["rates", "--beta", "2", "--dim", "2", "--tau", "2", "--alpha", "1,1.5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn reports_are_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_experiment(&config, &a, "1");
    run_experiment(&config, &b, "3");
    for name in ["report.csv", "report.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn degenerate_ladder_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, CONFIG.replace("[20, 30, 40, 50]", "[50, 50, 50, 50]")).unwrap();
    let out = rate_lab()
        .args(["experiment", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
