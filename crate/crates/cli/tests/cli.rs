//! End-to-end runs of the `pressure` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(dir: &Path, command: &str, config: &str, out: &str) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{out}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(out);
    let output = Command::new(env!("CARGO_BIN_EXE_pressure"))
        .args([command, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (output, out)
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

fn linear_torus_config() -> Value {
    json!({
        "system": {"name": "linear-torus"},
        "potential": {"kind": "constant", "c": 2.0},
        "variants": ["R1"],
        "t_grid": [25, 50, 75, 100],
        "eps_grid": [0.05],
        "dt": 0.5,
        "measure": {"source": "orbit", "atoms": 2000, "x0": [0.1, 0.2], "burn_in": 0, "dt": 0.38196601125}
    })
}

#[test]
fn combinatorics_sizes_match_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = run(
        dir.path(),
        "verify-combinatorics",
        r#"{"combinatorics": {"max_n": 6}}"#,
        "comb",
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let file = out.join("combinatorics.csv");
    assert_eq!(
        header(&file),
        ["alphabet", "n", "r", "exact", "enumerated", "log_count", "match"]
    );
    let table = rows(&file);
    assert_eq!(table.len(), 2 * 6 * 4);
    assert!(table.iter().all(|r| r[3] == r[4] && r[6] == "1"));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["command"], "verify-combinatorics");
    assert_eq!(report["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn linear_torus_metric_readoff_is_the_constant() {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = run(
        dir.path(),
        "estimate-metric",
        &linear_torus_config().to_string(),
        "metric",
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let table = out.join("metric_table.csv");
    assert_eq!(
        header(&table),
        ["variant", "t", "eps", "delta", "value", "method", "K_id", "fill_radius"]
    );
    for r in rows(&table) {
        assert_eq!(r[6], "-1");
        assert_eq!(r[7], "-1");
    }
    let readoffs = rows(&out.join("metric_readoffs.csv"));
    assert!(!readoffs.is_empty());
    for r in readoffs {
        let slope: f64 = r[4].parse().unwrap();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }
}

#[test]
fn empty_grid_is_a_validation_error_with_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = "{\n  \"system\": {\"name\": \"linear-torus\"},\n  \"potential\": {\"kind\": \"constant\", \"c\": 2.0},\n  \"t_grid\": [],\n  \"eps_grid\": [0.05],\n  \"dt\": 0.5\n}\n";
    let (output, out) = run(dir.path(), "estimate-metric", config, "bad");
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("config:4: t_grid"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_keys_and_systems_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (output, _) = run(
        dir.path(),
        "estimate-metric",
        r#"{"system": {"name": "pendulum"}}"#,
        "a",
    );
    assert_eq!(output.status.code(), Some(2));
    let (output, _) = run(dir.path(), "estimate-metric", r#"{"t_gird": [1]}"#, "b");
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("config:1:"));
}

#[test]
fn infeasible_cover_is_a_runtime_error_with_payload() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = linear_torus_config();
    config["pool_size"] = json!(3);
    config["deltas"] = json!([0.01]);
    let (output, out) = run(dir.path(), "estimate-metric", &config.to_string(), "infeasible");
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8_lossy(&output.stderr);
    let payload: Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(payload["error"], "infeasible-cover");
    assert!(payload["max_mass"].as_f64().unwrap() <= payload["required"].as_f64().unwrap());
    assert!(!out.join("metric_table.csv").exists());
}

#[test]
fn reruns_are_byte_identical_and_finite() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "system": {"name": "sine-grid"},
        "potential": {"kind": "bump", "center": [0.25, 0.25], "radius": 0.2, "mass": 1.0},
        "variants": ["R1", "R2", "R3"],
        "t_grid": [0.5, 1],
        "eps_grid": [0.1, 0.2],
        "dt": 0.01,
        "rho_sing": 0.1,
        "compact": {"source": "lattice", "per_side": 16, "sizes": [10, 20]}
    })
    .to_string();
    let (first, a) = run(dir.path(), "estimate-topo", &config, "first");
    let (second, b) = run(dir.path(), "estimate-topo", &config, "second");
    assert!(first.status.success() && second.status.success());
    for file in ["topo_table.csv", "topo_per_k.csv", "topo_readoffs.csv"] {
        let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
        assert_eq!(x, y, "{file}");
        for r in rows(&a.join(file)) {
            for cell in r {
                if let Ok(v) = cell.parse::<f64>() {
                    assert!(v.is_finite(), "{file}: {cell}");
                }
            }
        }
    }
    let per_k = rows(&a.join("topo_per_k.csv"));
    assert!(per_k.iter().all(|r| r[6] != "-1" && r[7].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn sandwich_and_gamma_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "system": {"name": "sine-grid"},
        "potential": {"kind": "coordinate-sine", "axis": 0},
        "t_grid": [1],
        "eps_grid": [0.05, 0.1],
        "dt": 0.01,
        "rho_sing": 0.1,
        "compact": {"source": "lattice", "per_side": 16, "sizes": [12]},
        "gamma": {"centers": 50, "eps": 0.05, "t_values": [1, 2]}
    })
    .to_string();
    let (output, out) = run(dir.path(), "verify-sandwich", &config, "sandwich");
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let table = rows(&out.join("sandwich.csv"));
    assert_eq!(table.len(), 2);
    let (output, out) = run(dir.path(), "gamma", &config, "gamma");
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert_eq!(rows(&out.join("gamma.csv")).len(), 2);
}
