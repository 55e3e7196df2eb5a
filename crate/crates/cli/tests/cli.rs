use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn buzzload(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_buzzload"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bundled_log() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic-sessions.csv")
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(buzzload(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(buzzload(&[]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = buzzload(&[
        "simulate",
        "--params",
        "preset:nope",
        "--events",
        "10",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown preset"));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let missing = dir.path().join("missing.json");
    let o = buzzload(&[
        "simulate",
        "--params",
        arg(&missing),
        "--events",
        "10",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = buzzload(&[
            "simulate",
            "--params",
            "preset:case-b",
            "--events",
            "5000",
            "--seed",
            seed,
            "--out",
            arg(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "7");
    assert_eq!(a, run("b.csv", "7"));
    assert_ne!(a, run("c.csv", "8"));
}

#[test]
fn every_preset_parses() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "case-a",
        "case-b",
        "case-c",
        "fitted-trace1",
        "fitted-trace2",
        "demo-buzz",
        "demo-buzz-free",
    ] {
        let out = dir.path().join(format!("{name}.csv"));
        let params = format!("preset:{name}");
        let o = buzzload(&[
            "simulate",
            "--params",
            &params,
            "--events",
            "100",
            "--out",
            arg(&out),
        ]);
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn spectrum_feeds_provisioning() {
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("sp.csv");
    let o = buzzload(&[
        "spectrum",
        "--params",
        "preset:demo-buzz-free",
        "--theoretical",
        "--out",
        arg(&sp),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = buzzload(&[
        "provision",
        "--spectrum",
        arg(&sp),
        "--p-loss",
        "1e-3",
        "--buffer",
        "10",
        "--capacity",
        "1000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let m = &v["safety_margin"];
    assert!(m["loss"].as_f64().unwrap() <= 1e-3);
    assert!(m["servers"].as_u64().unwrap() > 0);
    assert!(m["c0"].as_f64().unwrap() > 0.0);
}

#[test]
fn closure_on_a_short_log() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bundled_log()).unwrap();
    let head: Vec<&str> = text.lines().take(20_001).collect();
    let log = dir.path().join("sessions.csv");
    std::fs::write(&log, head.join("\n") + "\n").unwrap();
    let out = dir.path().join("closure");
    let o = buzzload(&[
        "experiment",
        "closure",
        "--sessions",
        arg(&log),
        "--out-dir",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["closure.json", "histogram.csv", "autocorrelation.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let tv = v["tv_distance"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&tv));
}
