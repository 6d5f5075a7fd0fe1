use std::process::Command;

use serde_json::Value;

fn qiht(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qiht"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).expect("stdout is JSON")
}

#[test]
fn design_quantizer_json() {
    let (code, out, _) = qiht(&["design-quantizer", "--bits", "1"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["bits"], 1);
    assert_eq!(v["thresholds"][0], "-inf");
    assert_eq!(v["thresholds"][2], "+inf");
    let level = v["levels"][1].as_f64().unwrap();
    assert!((level - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    for key in ["weights", "distortion"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn design_quantizer_rejects_zero_bits() {
    let (code, _, err) = qiht(&["design-quantizer", "--bits", "0"]);
    assert_ne!(code, 0);
    assert!(err.contains("error"));
}

#[test]
fn reconstruct_record() {
    let args = [
        "reconstruct",
        "--method",
        "qiht",
        "--bits",
        "2",
        "--m",
        "256",
        "--n",
        "512",
        "--k",
        "8",
        "--seed",
        "4",
    ];
    let (code, out, _) = qiht(&args);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["method"], "qiht");
    assert!(v["snr_db"].as_f64().unwrap() > 10.0);
    assert!(v["iterations"].as_u64().unwrap() >= 1);
    assert!(v["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(["tolerance", "max_iters"].contains(&v["terminated_by"].as_str().unwrap()));

    // Same seed, same instance: BIHT is QIHT at one bit.
    let base = [
        "--bits", "1", "--m", "256", "--n", "512", "--k", "8", "--seed", "4",
    ];
    let run = |m: &str| {
        let mut a = vec!["reconstruct", "--method", m];
        a.extend_from_slice(&base);
        json(&qiht(&a).1)
    };
    assert_eq!(run("biht")["snr_db"], run("qiht")["snr_db"]);
}

#[test]
fn reconstruct_argument_errors() {
    let (code, _, _) = qiht(&["reconstruct", "--method", "ht", "--bits", "2", "--m", "256"]);
    assert_eq!(code, 2);
    let (code, _, _) = qiht(&["reconstruct", "--method", "iht", "--m", "20"]);
    assert_eq!(code, 2);
}

#[test]
fn embed_check_reports() {
    let (code, out, _) = qiht(&[
        "embed-check",
        "--mode",
        "spe",
        "--m",
        "256",
        "--n",
        "128",
        "--k",
        "4",
        "--pairs",
        "50",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["mean_deviation"].as_f64().unwrap() <= v["max_deviation"].as_f64().unwrap());

    let (code, out, _) = qiht(&[
        "embed-check",
        "--mode",
        "proximity",
        "--r",
        "4",
        "--pairs",
        "100",
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["bound_factor"], 2.0);
}

#[test]
fn sweep_writes_csv_and_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    let out = dir.path().join("results.csv");
    std::fs::write(
        &cfg,
        "n = 128\nk = 4\nbits = 1,2\nbudgets = 64,128\ntrials = 2\nseed = 1\nmethods = iht,qiht\n",
    )
    .unwrap();
    let (code, _, err) = qiht(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("method,b,M,budget,trial,snr_db,iterations,terminated_by\n"));
    assert!(csv.contains("# aggregates\n"));

    std::fs::write(&cfg, "n = 128\nsparsity = 4\n").unwrap();
    let (code, _, err) = qiht(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ne!(code, 0);
    assert!(err.contains("sparsity"), "{err}");
}
