use std::path::Path;
use std::process::{Command, Output};

fn mpg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpg"))
        .args(args)
        .env("MPG_OUT_DIR", out)
        .output()
        .expect("spawn mpg")
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpg(&["train", "--config", "/definitely/not/here.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("here.toml"));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "episodes = 1\nlearnin_rate = 0.1\n").unwrap();
    let o = mpg(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learnin_rate"));
}

#[test]
fn single_episode_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpg(&["train", "--episodes", "1", "--runs", "1", "--estimator", "standard"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("episodes_standard-0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "run_id,seed,episode,steps,discounted_return,outcome");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("standard-0,0,0,"));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().ends_with("manifest_train.json"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest_train.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["episodes"], 1);
    assert_eq!(manifest["seeds"], serde_json::json!([0]));
}

#[test]
fn variance_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "n_states = 4\nn_per_state = 250\nbootstrap = 50\nseed = 3\n").unwrap();
    let args = ["variance", "--config", cfg.to_str().unwrap()];
    let a = mpg(&args, dir.path());
    let b = mpg(&args, dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["n"], 1000);
    assert_eq!(v["seed"], 3);
    assert_eq!(v["mode"], "init");
    assert!(v["var_marginal"].as_f64().unwrap() <= v["var_standard"].as_f64().unwrap());
    assert!(dir.path().join("variance_init.json").exists());
}

#[test]
fn variance_below_minimum_samples_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "n_states = 1\nn_per_state = 999\n").unwrap();
    let o = mpg(&["variance", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trained_mode_without_checkpoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "mode = \"trained\"\n").unwrap();
    let o = mpg(&["variance", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = mpg(&["variance", "--checkpoint", "/no/such/ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_mfun_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpg(&["check", "mfun"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS")));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn unknown_suite_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mpg(&["check", "nope"], dir.path()).status.code(), Some(2));
}

#[test]
fn mcheck_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpg(&["mcheck"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("d,alpha,recursion,quadrature,rel_err"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11 * 21);
    assert!(rows.iter().all(|r| r.len() == 5 && r[4] <= 1e-8));
    // M_0(0) = 1/2
    assert!(rows.iter().any(|r| r[0] == 0.0 && r[1] == 0.0 && (r[2] - 0.5).abs() < 1e-15));
}
