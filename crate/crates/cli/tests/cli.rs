use std::path::Path;
use std::process::{Command, Output};

fn synrdp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synrdp"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn entropy_prints_and_writes_its_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = synrdp(tmp.path(), &["entropy"]);
    assert!(out.status.success());
    let v = json(&tmp.path().join("entropy.json"));
    assert_eq!(v["h"], 1.5);
    assert!((v["h_s"].as_f64().unwrap() - 0.811_278_124_459_132_8).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"h_s\""));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[source]\nprobs = [0.5, 0.5]\n[partition]\nblocks = [[0, 1]]\nverbose = true\n").unwrap();
    let out = synrdp(tmp.path(), &["entropy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verbose"));

    let out = synrdp(tmp.path(), &["entropy", "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("symbols.txt");
    std::fs::write(&input, "0\n1\n7\n").unwrap();
    let out = synrdp(tmp.path(), &["codec-run", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("bitstream.srdp").exists());
}

#[test]
fn singleton_codec_run_is_lossless() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("single.toml");
    std::fs::write(&cfg, "[source]\nprobs = [0.5, 0.25, 0.25]\n[partition]\nblocks = [[0], [1], [2]]\n[codec]\nn = 5000\n").unwrap();
    let out = synrdp(tmp.path(), &["codec-run", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = json(&tmp.path().join("codec_report.json"));
    assert_eq!(report["expected_distortion"], 0.0);
}

#[test]
fn disabled_perception_column_matches_the_rd_curve() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(synrdp(tmp.path(), &["rd-curve", "--format", "json"]).status.success());
    assert!(synrdp(tmp.path(), &["rdp-surface", "--format", "json"]).status.success());
    let rd = json(&tmp.path().join("rd_curve.json"));
    let surface = json(&tmp.path().join("rdp_surface.json"));
    for point in rd.as_array().unwrap() {
        let twin = surface
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["d_target"] == point["d_target"] && s["p_target"] == "inf")
            .expect("P = inf column present");
        let gap = (twin["rate"].as_f64().unwrap() - point["rate"].as_f64().unwrap()).abs();
        assert!(gap < 1e-4, "gap {gap} at {}", point["d_target"]);
    }
}

#[test]
fn csv_sweeps_have_a_fixed_header() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(synrdp(tmp.path(), &["rd-curve"]).status.success());
    let text = std::fs::read_to_string(tmp.path().join("rd_curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d_target,p_target,rate,achieved_d,achieved_p,iters,converged"));
    assert_eq!(lines.count(), 5);
}
