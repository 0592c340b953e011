use std::path::Path;
use std::process::{Command, Output};

fn nslimit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nslimit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_SWEEP: &str = r#"
[grid]
nx = 8
ny = 64

[sweep]
mode = "MODE"
eps_list = [2e-2, 1e-2, 5e-3]
t_final = 0.05
record_every = 5
"#;

fn write_config(dir: &Path, mode: &str) -> std::path::PathBuf {
    let p = dir.join(format!("{mode}.toml"));
    std::fs::write(&p, SMALL_SWEEP.replace("MODE", mode)).unwrap();
    p
}

#[test]
fn verify_suites_pass() {
    let o = nslimit(&["verify-thermo", "--trials", "2000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("thermo: 5/5 checks passed"));
    let o = nslimit(&[
        "verify-tensor",
        "--trials",
        "2000",
        "--coercivity-trials",
        "10",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn run_writes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("case");
    let o = nslimit(&[
        "--threads",
        "1",
        "run",
        "--mode",
        "navier",
        "--eps",
        "0.01",
        "--T",
        "0.02",
        "--nx",
        "8",
        "--ny",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("step,time,dt,energy,"));
    assert!(csv.lines().count() > 2);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("case.json")).unwrap()).unwrap();
    assert_eq!(json["spec"]["beta"], serde_json::json!(0.1));
}

#[test]
fn run_rejects_friction_without_slip() {
    let o = nslimit(&["run", "--mode", "noslip", "--eps", "0.01", "--beta", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "navier");
    let out = dir.path().join("out");
    let o = nslimit(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for f in [
        "sweep.csv",
        "sweep.json",
        "eps_00/diagnostics.csv",
        "eps_02/diagnostics.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let r = nslimit(&["report", out.join("sweep.json").to_str().unwrap()]);
    assert!(r.status.success());
    assert!(stdout(&r).contains("slopes vs eps"));
}

#[test]
fn noslip_sweep_exit_code_follows_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "noslip");
    let out = dir.path().join("out");
    let o = nslimit(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    let want = match json["verdict"]["verdict"].as_str().unwrap() {
        "consistent" => 0,
        "hypothesis_unmet" => 2,
        "inconsistent" => 3,
        _ => 1,
    };
    assert_eq!(o.status.code(), Some(want), "{}", stdout(&o));
}

#[test]
fn bad_config_is_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[sweep]\nmode = \"noslip\"\neps_list = [1e-3, 1e-2]\n").unwrap();
    let o = nslimit(&["sweep", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps_list"));
}
