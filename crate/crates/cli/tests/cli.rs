use std::fs;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetnet-sim"))
        .args(args)
        .env_remove("HETNET_OUTPUT_DIR")
        .output()
        .unwrap()
}

const SMALL: &[&str] = &["--users", "4", "--femtos", "1", "--subchannels", "3", "--drops", "2"];

#[test]
fn run_writes_campaign_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let mut args = vec!["run", "--output", out_dir.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let out = sim(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["campaign.json", "user_rates.csv", "cdf.csv", "drops.csv", "traces.csv"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("2 drops"), "{stdout}");
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run"];
    args.extend_from_slice(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_hetnet-sim"))
        .args(&args)
        .env("HETNET_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("campaign.json").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.toml");
    fs::write(&path, "num_users = 7\nseed = 99\n[channel]\nshadow_sigma_db = 4.0\n").unwrap();
    let out = sim(&["config", "--config", path.to_str().unwrap(), "--seed", "5", "--no-fairness"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("num_users = 7"));
    assert!(text.contains("seed = 5"));
    assert!(text.contains("fairness = false"));
    assert!(text.contains("shadow_sigma_db = 4.0"));
}

#[test]
fn json_config_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.json");
    fs::write(&path, r#"{"num_users": 3, "algorithm": "max-sinr"}"#).unwrap();
    let out = sim(&["config", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("algorithm = \"max-sinr\""));
}

#[test]
fn invalid_config_exits_nonzero() {
    let out = sim(&["run", "--users", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_users"));
    let out = sim(&["run", "--subchannels", "4", "--macro-subchannels", "5"]);
    assert!(!out.status.success());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "num_userz = 3\n").unwrap();
    let out = sim(&["config", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn bad_enum_value_is_rejected() {
    assert!(!sim(&["config", "--placement", "sideways"]).status.success());
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--param", "num_users", "--values", "2,3", "--output", dir.path().to_str().unwrap()];
    args.extend_from_slice(&SMALL[2..]);
    let out = sim(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("num_users-3/campaign.json").exists());
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let out = sim(&["sweep", "--param", "bandwidth", "--values", "1"]);
    assert!(!out.status.success());
}
