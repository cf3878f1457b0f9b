//! Binary-level contract: config round-trips, exit codes, artifact files,
//! and scheduling-independent CSV bytes.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use ssl_cli::config::ExperimentConfig;

fn ssl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssl"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ssl-cli-test-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

const PC_CONFIG: &str = r#"
kind = "pc"
seed = 5

[target]
type = "gaussian_mixture"
weights = [0.5, 0.5]
means = [[-2.0], [2.0]]
variances = [1.0, 1.0]

[model]
family = "ddpm"
horizon = 2.0

[model.schedule]
kind = "constant"
c = 1.0

[oracle]
mode = "constant_shift"
eps1 = 0.05
seed = 9

[sampler]
chains = 128
step_size = 0.01
steps = 200

[pc]
corrector_step_size = 0.005
corrector_steps = 2
placement = "every"

[measure]
diag_stride = 50
"#;

#[test]
fn config_round_trips_through_serialization() {
    let cfg = ExperimentConfig::from_str(PC_CONFIG).expect("parse");
    let again = ExperimentConfig::from_str(&cfg.to_toml()).expect("reparse");
    assert_eq!(cfg, again);
}

#[test]
fn malformed_config_exits_1_with_location() {
    let dir = scratch("badcfg");
    let path = dir.join("bad.toml");
    fs::write(&path, "kind = \"lmc\"\nseed = \"not a number\"\n").unwrap();
    let out = ssl().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "parse errors should locate themselves, got: {err}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn missing_config_file_exits_1() {
    let out = ssl().args(["run", "/nonexistent/nope.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_verify_suite_exits_1() {
    let out = ssl().args(["verify", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bounds_subcommand_prints_csv() {
    let out = ssl()
        .args([
            "bounds",
            "lmc",
            "--dim",
            "1",
            "--l",
            "1.0",
            "--c-ls",
            "1.0",
            "--eps1",
            "0.0",
            "--step-size",
            "0.0001",
            "--steps",
            "100",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!(text.starts_with("step,statistic,value,method"), "got: {text}");
    assert!(text.contains("chi2_stationary_limit"));
}

#[test]
fn schedule_subcommand_prints_ladder() {
    let out = ssl()
        .args([
            "schedule",
            "--dim",
            "1",
            "--sigma-min-sq",
            "0.5",
            "--c-ls",
            "9.0",
            "--m1",
            "4.0",
            "--eps-tv",
            "0.3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!(text.contains("sigma2"));
    assert!(text.contains("total steps"));
}

#[test]
fn diverged_run_exits_3() {
    let dir = scratch("diverge");
    let path = dir.join("cfg.toml");
    fs::write(
        &path,
        r#"
kind = "lmc"
seed = 1

[target]
type = "gaussian_mixture"
weights = [1.0]
means = [[0.0]]
variances = [1.0]

[sampler]
chains = 4
step_size = 1e100
steps = 10

[sampler.init]
kind = "point"
at = [0.0]
"#,
    )
    .unwrap();
    let out = ssl().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).contains("DIVERGED"));
    let _ = fs::remove_dir_all(&dir);
}

const SWEEP_CONFIG: &str = r#"
kind = "lmc"
seed = 11
# OUTPUT

[target]
type = "gaussian_mixture"
weights = [1.0]
means = [[0.0]]
variances = [1.0]

[oracle]
mode = "bump_mismatch"
l = 4.0

[sampler]
chains = 500
step_size = 0.005
steps = 200

[sampler.init]
kind = "point"
at = [0.0]

[measure]
diag_stride = 50
snapshots = [50, 100]
moments_after = 100
histogram_tv = true
mode_masses = true
"#;

#[test]
fn run_writes_artifacts_and_csv_is_thread_count_invariant() {
    let base = scratch("threads");
    let cfg_path = base.join("cfg.toml");
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let out_dir = base.join(format!("out{threads}"));
        let text =
            SWEEP_CONFIG.replace("# OUTPUT", &format!("output = \"{}\"", out_dir.display()));
        fs::write(&cfg_path, text).unwrap();
        let out = ssl().arg("run").arg(&cfg_path).env("SSL_THREADS", threads).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        for name in ["run.csv", "summary.txt", "manifest.txt"] {
            assert!(out_dir.join(name).exists(), "missing {name}");
        }
        outputs.push((
            fs::read(out_dir.join("run.csv")).unwrap(),
            fs::read(out_dir.join("summary.txt")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "run.csv must not depend on thread count");
    assert_eq!(outputs[0].1, outputs[1].1, "summary.txt must not depend on thread count");
    let _ = fs::remove_dir_all(&base);
}

#[test]
fn identical_invocations_produce_identical_csv_bytes() {
    let base = scratch("repeat");
    let cfg_path = base.join("cfg.toml");
    let mut csvs = Vec::new();
    for round in 0..2 {
        let out_dir = base.join(format!("round{round}"));
        let text =
            SWEEP_CONFIG.replace("# OUTPUT", &format!("output = \"{}\"", out_dir.display()));
        fs::write(&cfg_path, text).unwrap();
        let out = ssl().arg("run").arg(&cfg_path).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read(out_dir.join("run.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let _ = fs::remove_dir_all(&base);
}
