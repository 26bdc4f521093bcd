use std::path::Path;
use std::process::{Command, Output};

use abelconv::network::Network;

fn abelconv(args: &[&str]) -> Output {
    abelconv_env(args, &[])
}

fn abelconv_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_abelconv"));
    cmd.args(args).env_remove("ABELCONV_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    let line = text.lines().find(|l| l.starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn identity_spectrum_is_all_ones() {
    let o = abelconv(&["spectra", "--identity", "--group", "3,4", "--widths", "2,2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("s_min = 1.000000"), "{text}");
    assert!(text.contains("s_max = 1.000000"), "{text}");

    let o = abelconv(&["--json", "spectra", "--identity", "--group", "6", "--widths", "3,3"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["s_min"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["s_max"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["count"], 18);
}

#[test]
fn minimal_config_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "group = [8]\nwidths = [4, 2]\n");
    let o = abelconv(&["--config", &cfg, "spectra"]);
    assert!(o.status.success(), "{:?}", o);
    let empty = write(dir.path(), "empty.toml", "");
    assert!(abelconv(&["--config", &empty, "spectra", "--group", "8", "--widths", "2,2"]).status.success());
}

#[test]
fn n_above_order_is_a_named_error() {
    let o = abelconv(&["spectra", "--group", "8", "--widths", "2,2", "--n", "9"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "invalid-config");
    assert_eq!(err["field"], "n");
}

#[test]
fn unknown_key_and_bad_values_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "trials = 3\nwidht = [1]\n");
    let o = abelconv(&["--config", &cfg, "spectra"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["field"], "widht");

    let o = abelconv(&["attack", "--activation", "relu"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["field"], "activation");

    let o = abelconv(&["attack", "--trials", "many"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["field"], "trials");

    let o = abelconv(&["verify"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["field"], "experiment");
}

#[test]
fn flag_beats_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "experiment = \"output\"\ngroup = [8]\nwidths = [3, 2]\nn = [3]\ntrials = 7\n",
    );
    let out = dir.path().join("out");
    let o = abelconv(&["--config", &cfg, "verify", "--trials", "4", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(out.join("output.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let mut files: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["output.csv", "output.summary.json"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("output.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"], 4);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert!(summary["git_describe"].is_string());
}

#[test]
fn verify_gradient_defaults_pass() {
    let o = abelconv(&["--json", "verify", "--experiment", "gradient"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["summary"]["pass"], true);
}

#[test]
fn failed_bound_exits_two() {
    let o = abelconv(&[
        "verify", "--experiment", "spectrum", "--group", "8", "--widths", "4,2", "--n", "3", "--trials", "5",
        "--band-a", "10", "--band-b", "20",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn attack_is_deterministic() {
    let args = ["--json", "attack", "--seed", "7", "--group", "16", "--widths", "4,2"];
    let a = abelconv(&args);
    let b = abelconv(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["report"]["a"], 10.0);
}

#[test]
fn seed_comes_from_environment() {
    let args = ["--json", "attack", "--group", "8", "--widths", "3,2"];
    let env = abelconv_env(&args, &[("ABELCONV_SEED", "7")]);
    let flag = abelconv(&["--json", "attack", "--group", "8", "--widths", "3,2", "--seed", "7"]);
    let default = abelconv(&args);
    assert_eq!(env.stdout, flag.stdout);
    assert_ne!(env.stdout, default.stdout);
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = abelconv(&[
        "sweep", "--widths", "4,2", "--trials", "3", "--sweep-group", "4", "--sweep-group", "2,4",
        "--out-dir", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("N_0,|G|,d_0,seed,flip,rho,step_len,grad_norm,Hb_before,Hb_after\n"));
    assert_eq!(csv.lines().count(), 7);
    assert!(out.join("sweep_summary.json").exists());
}

#[test]
fn net_dump_round_trips() {
    let o = abelconv(&["net-dump", "--group", "2,3", "--widths", "3,2,1", "--seed", "4"]);
    assert!(o.status.success());
    let net: Network = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(net.widths(), vec![3, 2, 1]);
    assert_eq!(net.spec().moduli(), &[2, 3]);
    let again: Network = serde_json::from_slice(&abelconv(&["net-dump", "--group", "2,3", "--widths", "3,2,1", "--seed", "4"]).stdout).unwrap();
    assert_eq!(net, again);
}
