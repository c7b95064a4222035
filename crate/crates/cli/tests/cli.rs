use std::path::Path;
use std::process::{Command, Output};

fn stcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stcast"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: [&str; 10] = [
    "--set", "sim.t_steps=120", "--set", "sim.post_onset_index=60", "--set", "epochs=2", "--set", "num_samples=30", "--seed", "3",
];

fn simulate(dir: &Path) -> String {
    let out = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--out", out];
    args.extend(SMALL);
    let o = stcast(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let conf = dir.join("run.conf");
    assert!(stdout(&o).contains("run.conf"));
    assert!(conf.exists());
    conf.to_str().unwrap().to_string()
}

#[test]
fn staged_commands_reproduce_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let conf = simulate(dir.path());
    for cmd in ["build-spatial", "estimate", "adjust", "train", "forecast"] {
        let o = stcast(&[cmd, "--config", &conf]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let eval = stcast(&["evaluate", "--config", &conf]);
    assert_eq!(code(&eval), 0);
    let text = stdout(&eval);
    for metric in ["crps ", "energy ", "wql@0.5 ", "interval_coverage@0.1 ", "quantile_coverage@0.9 "] {
        assert!(text.contains(metric), "missing {metric} in\n{text}");
    }
    let staged = std::fs::read(dir.path().join("forecast_samples.csv")).unwrap();

    let other = tempfile::tempdir().unwrap();
    let out = other.path().to_str().unwrap();
    let mut args = vec!["pipeline", "--out", out, "--set", "simulate=true"];
    args.extend(SMALL);
    let o = stcast(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("manifest"));
    assert_eq!(std::fs::read(other.path().join("forecast_samples.csv")).unwrap(), staged);
}

#[test]
fn unknown_key_is_a_config_error() {
    let o = stcast(&["pipeline", "--set", "no_such_key=1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
}

#[test]
fn missing_onset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = simulate(dir.path());
    let o = stcast(&["estimate", "--config", &conf, "--set", "post_onset_date="]);
    assert!(matches!(code(&o), 2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = stcast(&["build-spatial", "--out", out, "--set", "post_onset_date=2020-02-01"]);
    assert_eq!(code(&o), 6, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_panel_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = simulate(dir.path());
    let panel = dir.path().join("panel.csv");
    let text = std::fs::read_to_string(&panel).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let dup = lines[3];
    lines.insert(4, dup);
    std::fs::write(&panel, lines.join("\n") + "\n").unwrap();
    let o = stcast(&["estimate", "--config", &conf]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("panel.csv:5") && err.contains("duplicate"), "{err}");
}

#[test]
fn non_stationary_estimate_is_an_estimation_error() {
    // without covariates or their instruments this panel gives |rho| >= 1
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = stcast(&[
        "pipeline", "--out", out, "--seed", "0", "--set", "simulate=true", "--set", "sim.rho=0.5", "--set", "sim.delta=-5",
        "--set", "no_factors=true",
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("failed_stage=estimate"));
}

#[test]
fn divergent_training_is_a_training_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = simulate(dir.path());
    for cmd in ["build-spatial", "estimate", "adjust"] {
        assert_eq!(code(&stcast(&[cmd, "--config", &conf])), 0);
    }
    let o = stcast(&["train", "--config", &conf, "--set", "learning_rate=1e300", "--set", "grad_clip=1e300"]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&stcast(&["frobnicate"])), 2);
    assert_eq!(code(&stcast(&["pipeline", "--seed", "not-a-number"])), 2);
}
