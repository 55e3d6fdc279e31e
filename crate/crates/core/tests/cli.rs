use std::path::Path;
use std::process::Command;

fn monoreg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_monoreg"))
}

fn write_small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.json");
    std::fs::write(
        &path,
        r#"{"n_directions": 8, "recon_grid": 8, "forward_grid": 16, "forward_subsamples": 2,
            "shapes": [{"kind": "disk", "radius": 1.5, "center": [1, -1], "contrast": 1}],
            "optimizer": {"max_iters": 20}}"#,
    )
    .unwrap();
    path
}

#[test]
fn pipeline_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let out = dir.path().join("run");
    let status = monoreg()
        .args(["pipeline", "--deterministic", "--seed", "5", "--delta", "0.02", "--k", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("reconstruction jaccard"));
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(written["seed"], 5);
    assert_eq!(written["noise_level"], 0.02);
    assert_eq!(written["wave_number"], 1.0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn staged_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let out = dir.path().join("staged");
    for sub in ["simulate", "reconstruct", "baselines"] {
        let o = monoreg().arg(sub).arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["far_field.csv", "far_field.json", "reconstruction.csv", "beta_star.csv", "tikhonov.csv", "factorization.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let o = monoreg()
        .arg("reconstruct")
        .arg("--config")
        .arg(&cfg)
        .arg("--far-field")
        .arg(out.join("far_field.csv"))
        .arg("--inverse-crime")
        .arg("--out")
        .arg(dir.path().join("other"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let o = monoreg().args(["pipeline", "--delta=-1", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise_level"));
    let o = monoreg().args(["pipeline", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = monoreg().args(["frobnicate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = monoreg()
        .arg("reconstruct")
        .arg("--out")
        .arg(dir.path().join("empty"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("empty").exists());
}

#[test]
fn selftest_passes() {
    let o = monoreg().arg("selftest").output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("[PASS] beta* vs bisection"));
    assert!(!stdout.contains("FAIL"));
}
