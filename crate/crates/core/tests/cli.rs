use std::path::Path;
use std::process::{Command, Output};

fn ksym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksym")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL: &str = r#"{
  "name": "small",
  "experiment": "classify",
  "domain": {"kind": "Annulus", "r_inner": 0.5, "r_outer": 1.0},
  "grid": {"n_r": 12, "n_theta": 24},
  "nonlinearity": {"kind": "LaneEmden", "p": 3.0},
  "k_list": [1, 2]
}"#;

#[test]
fn shipped_scenarios_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let out = ksym(&["validate", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&out.stderr));
        n += 1;
    }
    assert!(n > 0);
}

#[test]
fn config_errors_exit_with_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &SMALL.replace("\"n_theta\": 24", "\"n_theta\": 24, \"n_z\": 3"));
    let out = ksym(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.n_z"));

    let out = ksym(&["run", &bad, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(ksym(&["run", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(ksym(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ksym(&["inspect", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn run_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "small.json", SMALL);
    let out_dir = dir.path().join("out");
    let out = ksym(&["run", &sc, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("k1: ok") && stdout.contains("k2: ok"), "{stdout}");
    for f in ["report.json", "timings.json", "summary.csv", "k1/u.json", "k1/u.f64", "k1/u.pgm", "k2/w_star.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert_eq!(report["runs"][0]["classification"]["verdict"]["kind"], "AxisSymmetricMonotone");

    let out = ksym(&["inspect", out_dir.join("k1/u.json").to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("12 x 24"));
}

#[test]
fn numerical_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "\"k_list\": [1, 2]",
        "\"k_list\": [2], \"experiment\": \"solve\", \"seeds\": [\"peaks(2)\"], \"solver\": {\"max_iter\": 0, \"newton\": {\"max_iter\": 0}}",
    );
    let text = text.replace("\"experiment\": \"classify\",", "");
    let sc = write(dir.path(), "fail.json", &text);
    let out = ksym(&["run", &sc, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/report.json").exists());
}

#[test]
fn seed_rng_changes_only_sampled_directions() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "small.json", SMALL);
    let read = |seed: &str| {
        let o = dir.path().join(seed);
        assert!(ksym(&["run", &sc, "--out", o.to_str().unwrap(), "--seed-rng", seed]).status.success());
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
        v
    };
    let (a, b) = (read("1"), read("2"));
    assert_eq!(a["runs"][0]["energy"], b["runs"][0]["energy"]);
    assert_ne!(a["runs"][0]["residual_l_e"], b["runs"][0]["residual_l_e"]);
    assert_eq!(
        std::fs::read(dir.path().join("1/k1/u.f64")).unwrap(),
        std::fs::read(dir.path().join("2/k1/u.f64")).unwrap()
    );
}
