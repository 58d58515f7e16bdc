use std::path::Path;
use std::process::{Command, Output};

fn wwkde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wwkde"))
        .args(args)
        .env_remove("WWKDE_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_RATE: &str = r#"{
    "density": {"family": "gaussian", "dim": 1},
    "smoothness": {"beta": 2.0, "L": 1.0},
    "kernel": {"family": "epanechnikov", "dim": 1},
    "grid": {"kind": "point", "x0": [0.0]},
    "n_values": [64, 128, 256, 512],
    "replications": 40,
    "base_seed": 7,
    "target": "rate",
    "statistic": {"kind": "pointwise"},
    "acceptance": {"slope_tolerance": TOL}
}"#;

const SMALL_TAIL: &str = r#"{
    "density": {"family": "triangular", "dim": 1},
    "smoothness": {"beta": 1.0, "L": 1.0},
    "kernel": {"family": "epanechnikov", "dim": 1},
    "grid": {"kind": "point", "x0": [0.0]},
    "n_values": [50, 200],
    "replications": 400,
    "base_seed": 11,
    "target": "calibrate",
    "statistic": {"kind": "pointwise"}
}"#;

#[test]
fn ci_example() {
    let alpha = format!("{}", 2.0 * (-8f64).exp());
    let o = wwkde(&["ci", "--n", "8", "--beta", "1", "--d", "1", "--alpha", &alpha, "--c4", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o.stdout);
    assert!((v["u_star"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert!((v["radius"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!((v["half_width"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn ci_writes_manifest_when_given_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ci.json");
    let o = wwkde(&["ci", "--n", "100", "--beta", "1", "--d", "1", "--alpha", "0.05", "--c4", "0.5", "--c3", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let m = json(&std::fs::read(dir.path().join("ci.json.manifest.json")).unwrap());
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"][0].as_str().unwrap(), s(&out));
}

#[test]
fn validate_kernel_gaussian() {
    let o = wwkde(&["validate-kernel", "--family", "gaussian", "--dim", "1"]);
    assert_eq!(code(&o), 0);
    let v = json(&o.stdout);
    assert!(v.is_object());
}

#[test]
fn validate_kernel_failure_exits_one() {
    // 4 nodes over a radius of 10 cannot normalize a Gaussian to 1e-14
    let o = wwkde(&["validate-kernel", "--family", "gaussian", "--dim", "1", "--nodes", "4", "--tol", "1e-14"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&wwkde(&["ci", "--bogus"])), 1);
    assert_eq!(code(&wwkde(&["frobnicate"])), 1);
    assert_eq!(code(&wwkde(&["--help"])), 0);
    assert_eq!(code(&wwkde(&["--version"])), 0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"density\": 3}").unwrap();
    let o = wwkde(&["rate-experiment", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 1);
    assert!(!o.stderr.is_empty());
    let o = wwkde(&["estimate", "--samples", s(&dir.path().join("missing.csv")), "--beta", "1", "--x0", "0"]);
    assert_eq!(code(&o), 1);
    let o = wwkde(&["ci", "--n", "8", "--beta", "1", "--d", "1", "--alpha", "1.5", "--c4", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn estimate_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    let body: String = (0..200).map(|i| format!("{}\n", ((i * 37 % 101) as f64 / 50.0) - 1.0)).collect();
    std::fs::write(&samples, format!("x\n{body}")).unwrap();
    let est = dir.path().join("est.csv");
    let o = wwkde(&[
        "estimate", "--samples", s(&samples), "--beta", "2", "--kernel", "epanechnikov", "--lo", "-2", "--hi", "2",
        "--points-per-axis", "41", "--pr", "--out", s(&est),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&est).unwrap();
    assert!(text.starts_with("x_1,f_ww,f_pr\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 42);
    assert!(dir.path().join("est.csv.manifest.json").exists());

    let svg = dir.path().join("est.svg");
    let back = dir.path().join("back.csv");
    let o = wwkde(&["plot", "--input", s(&est), "--out", s(&svg), "--data-out", s(&back)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&back).unwrap(), text.as_bytes());
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn estimate_at_a_point_on_headerless_two_column_input() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("s.csv");
    std::fs::write(&samples, "0.1,0.2\n-0.3,0.4\n0.0,-0.1\n").unwrap();
    let o = wwkde(&["estimate", "--samples", s(&samples), "--beta", "1", "--x0", "0,0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_1,x_2,f_ww"));
    let v: f64 = lines.next().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(v > 0.0);
}

fn run_rate(dir: &Path, cfg_text: &str, workers: &str) -> (Output, std::path::PathBuf) {
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, cfg_text).unwrap();
    let out = dir.join(format!("out{workers}"));
    let o = wwkde(&["rate-experiment", "--config", s(&cfg), "--out", s(&out), "--workers", workers]);
    (o, out)
}

#[test]
fn same_config_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_RATE.replace("TOL", "10.0");
    let (a, out_a) = run_rate(dir.path(), &cfg, "1");
    let (b, out_b) = run_rate(dir.path(), &cfg, "2");
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 0);
    for f in ["report.json", "rate.csv", "rate.svg"] {
        assert_eq!(std::fs::read(out_a.join(f)).unwrap(), std::fs::read(out_b.join(f)).unwrap(), "{f}");
    }
    let ma = json(&std::fs::read(out_a.join("manifest.json")).unwrap());
    let mb = json(&std::fs::read(out_b.join("manifest.json")).unwrap());
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["base_seed"], 7);
    assert_eq!(ma["outputs"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(out_a.join("rate.csv")).unwrap();
    assert!(csv.starts_with("n,mean_error,stderr,"));
}

#[test]
fn missed_window_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_rate(dir.path(), &SMALL_RATE.replace("TOL", "1e-9"), "1");
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    // outputs are still written
    assert!(out.join("report.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn calibrate_writes_tail_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tail.json");
    std::fs::write(&cfg, SMALL_TAIL).unwrap();
    let out = dir.path().join("cal");
    let o = wwkde(&["calibrate", "--config", s(&cfg), "--out", s(&out), "--workers", "1"]);
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&std::fs::read(out.join("report.json")).unwrap());
    assert!(report["c4"].is_number());
    for n in [50, 200] {
        let csv = std::fs::read_to_string(out.join(format!("tail_n{n}.csv"))).unwrap();
        assert!(csv.starts_with("u,p_hat,wilson_lo,wilson_hi\n"));
    }
    assert_eq!(code(&o) == 2, report["falsified"].as_bool().unwrap());

    let svg = dir.path().join("t.svg");
    let o = wwkde(&["plot", "--input", s(&out.join("tail_n200.csv")), "--out", s(&svg)]);
    assert_eq!(code(&o), 0);
}
