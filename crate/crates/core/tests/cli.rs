use std::fs;
use std::path::Path;
use std::process::Command;

fn oscstab(root: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_oscstab"))
        .args(args)
        .env("OSCSTAB_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_artifacts_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let code = oscstab(dir.path(), &["run", "--out", "r"]);
    assert_eq!(code, 0);
    let out = dir.path().join("r");
    for f in [
        "trajectory_classical.csv",
        "windows_classical.json",
        "summary.json",
        "timing.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let s = json(&out.join("summary.json"));
    assert_eq!(s["schema"], 1);
    let run = &s["runs"][0];
    assert_eq!(run["monotone_decrease"], true);
    assert!(run["exponential_fit"]["slope"].as_f64().unwrap() < 0.0);
    assert!(run["terminal_norm"].as_f64().unwrap() < 1e-2 * run["initial_norm"].as_f64().unwrap());
    assert_eq!(s["certificate_scan"]["violations"], 0);
}

#[test]
fn zero_state_run_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let code = oscstab(
        dir.path(),
        &[
            "run",
            "--x0",
            "0,0,0,0,0,0,0,0,0,0",
            "--T",
            "1",
            "--out",
            "z",
        ],
    );
    assert_eq!(code, 0);
    let s = json(&dir.path().join("z/summary.json"));
    assert_eq!(s["runs"][0]["terminal_norm"], 0.0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# short run\nT = 1\nmode = sampled\ngamma = 0.3\n").unwrap();
    let code = oscstab(
        dir.path(),
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--gamma",
            "0.4",
            "--out",
            "c",
        ],
    );
    assert_eq!(code, 3, "one second is too short to reach the threshold");
    let s = json(&dir.path().join("c/summary.json"));
    assert_eq!(s["config"]["gamma"], 0.4);
    assert_eq!(s["config"]["T"], 1.0);
    assert_eq!(s["runs"][0]["mode"], "sampled");
    assert!(dir.path().join("c/trajectory_sampled.csv").exists());
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(oscstab(dir.path(), &["run", "--system", "unicycle"]), 1);
    assert_eq!(oscstab(dir.path(), &["run", "--kappa", "1,1,2,3,4,5"]), 1);
    assert_eq!(
        oscstab(dir.path(), &["verify", "--kappa", "1,1,2,3,4,5"]),
        1
    );
    assert_eq!(oscstab(dir.path(), &["run", "--T", "0.25"]), 1);
    assert_eq!(
        oscstab(dir.path(), &["run", "--config", "/nonexistent/file.cfg"]),
        1
    );
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "gamma 0.5\n").unwrap();
    assert_eq!(
        oscstab(dir.path(), &["run", "--config", bad.to_str().unwrap()]),
        1
    );
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        oscstab(
            dir.path(),
            &["run", "--gamma", "40", "--T", "5", "--out", "d"]
        ),
        2
    );
    let s = json(&dir.path().join("d/summary.json"));
    assert_eq!(s["runs"][0]["diverged"], true);
}

#[test]
fn compare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        assert_eq!(
            oscstab(dir.path(), &["compare", "--T", "5", "--out", out]),
            3
        );
    }
    let files = [
        "compare.csv",
        "summary.json",
        "trajectory_classical.csv",
        "trajectory_sampled.csv",
        "windows_classical.json",
        "windows_sampled.json",
    ];
    for f in files {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let table = fs::read_to_string(dir.path().join("a/compare.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "t,norm_classical,norm_sampled,abs_diff"
    );
    assert_eq!(table.lines().count(), 1 + 51);
    let s = json(&dir.path().join("a/summary.json"));
    assert!(s["sup_abs_diff"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_passes_and_witness_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(oscstab(dir.path(), &["verify", "--out", "v"]), 0);
    let v = json(&dir.path().join("v/verify.json"));
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 6);
    let code = oscstab(
        dir.path(),
        &[
            "verify",
            "--checks",
            "iterated_integrals",
            "--resonance-witness",
            "--out",
            "w",
        ],
    );
    assert_eq!(code, 2);
    let w = json(&dir.path().join("w/verify.json"));
    let coeff = w["checks"][0]["details"]["resonant_cross_coefficient"]
        .as_f64()
        .unwrap();
    assert!((coeff + 0.2).abs() < 1e-6);
}
