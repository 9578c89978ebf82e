use std::path::Path;
use std::process::Command;

use serde_json::Value;

const COMMANDS: [&str; 8] =
    ["check", "itinerary", "manifold", "distortion", "srb-birkhoff", "srb-pushforward", "holonomy", "entropy"];

/// Small enough that all eight commands finish in seconds.
const SMALL_PERTURBED: &str = r#"{
    "family": "perturbed_lueroth",
    "parameters": {"epsilon": 0.02},
    "seed": 5,
    "check": {"nx": 16, "ny": 16, "branch_hi": 40, "g3_terms": 10000},
    "distortion": {"depth_hi": 8},
    "birkhoff": {"seeds": 8, "n": 4000, "bins": 16},
    "pushforward": {"points": 512, "n": 40, "bins": 16},
    "holonomy": {"pairs": 64, "depths": [4, 6]},
    "entropy": {"seeds": 8, "n": 4000, "cylinder_seeds": 4, "cylinder_depths": [1, 1], "cylinder_n": 20000}
}"#;

fn srblab(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_srblab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("SRBLAB_THREADS")
        .output()
        .expect("binary runs");
    out.status.code().expect("exit code")
}

fn summary(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_on_baker_passes_with_exact_margins() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"family": "baker", "parameters": {"N": 2}, "cone": {"alpha": 0.5, "K0": 2}}"#);
    assert_eq!(srblab(d.path(), &["check", "--config", &cfg]), 0);
    let s = summary(d.path(), "check");
    assert_eq!(s["status"], "ok");
    assert_eq!(s["config"]["check"]["nx"], 32);
    let h: Vec<f64> = s["result"]["hyperbolicity"]["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["min_margin"].as_f64().unwrap())
        .collect();
    assert_eq!(h, vec![0.75, 0.0, 0.75, 0.0]);
    assert!((s["result"]["g3"]["partial_sum"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);
    let csv = std::fs::read_to_string(d.path().join("check.csv")).unwrap();
    assert!(csv.starts_with("# group,condition,"));
}

#[test]
fn negative_margins_exit_with_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"family": "baker", "cone": {"alpha": 0.5, "K0": 2.5}}"#);
    assert_eq!(srblab(d.path(), &["check", "--config", &cfg]), 1);
    assert_eq!(summary(d.path(), "check")["result"]["all_satisfied"], false);
}

#[test]
fn errors_exit_with_two_and_carry_codes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"family": "baker", "parameters": {"N": 1}}"#);
    assert_eq!(srblab(d.path(), &["check", "--config", &cfg]), 2);
    assert_eq!(summary(d.path(), "check")["error"]["code"], "CONFIG_INVALID");

    let cfg = write_config(d.path(), r#"{"family": "baker", "manifold": {"symbols": [1, 3, 2]}}"#);
    assert_eq!(srblab(d.path(), &["manifold", "--config", &cfg]), 2);
    let s = summary(d.path(), "manifold");
    assert_eq!(s["error"]["code"], "INVALID_BRANCH");
    assert_eq!(s["config"]["family"], "baker");
}

#[test]
fn entropy_routes_on_baker() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(srblab(d.path(), &["entropy", "--route", "all"]), 0);
    let r = &summary(d.path(), "entropy")["result"];
    let ln2 = 2f64.ln();
    for route in ["derivative_growth", "directional", "integral"] {
        assert!((r[route]["value"].as_f64().unwrap() - ln2).abs() < 1e-9, "{route}");
    }
    assert!((r["cylinder"]["value"].as_f64().unwrap() - ln2).abs() < 0.01);
}

#[test]
fn runs_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_PERTURBED);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for cmd in COMMANDS {
        let ca = srblab(&a, &[cmd, "--config", &cfg, "--threads", "1"]);
        let cb = srblab(&b, &[cmd, "--config", &cfg, "--threads", "3"]);
        assert_eq!(ca, cb, "{cmd}");
        assert_eq!(ca, 0, "{cmd}: {}", summary(&a, cmd));
    }
    let mut files: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files.len(), 14);
    for f in files {
        let x = std::fs::read(a.join(&f)).unwrap();
        let y = std::fs::read(b.join(&f)).unwrap();
        assert!(x == y, "{f:?} differs");
        if f.to_str().unwrap().ends_with(".csv") {
            assert_eq!(x[0], b'#');
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_PERTURBED);
    srblab(d.path(), &["srb-birkhoff", "--config", &cfg, "--seed", "9"]);
    let s = summary(d.path(), "srb-birkhoff");
    assert_eq!(s["config"]["seed"], 9);
    let first = s["result"]["observables"][0]["mean"].as_f64().unwrap();
    srblab(d.path(), &["srb-birkhoff", "--config", &cfg, "--seed", "10"]);
    let other = summary(d.path(), "srb-birkhoff")["result"]["observables"][0]["mean"].as_f64().unwrap();
    assert_ne!(first, other);
}
