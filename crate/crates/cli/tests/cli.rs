use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use tempfile::TempDir;

fn hqip(dir: &Path, args: &[&str]) -> (i32, PathBuf) {
    let prefix = dir.join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_hqip")).args(args).arg("--out").arg(&prefix).output().unwrap();
    (status.status.code().unwrap(), prefix)
}

fn read(prefix: &Path, suffix: &str) -> String {
    fs::read_to_string(format!("{}{suffix}", prefix.display())).unwrap()
}

fn json(prefix: &Path, suffix: &str) -> Value {
    serde_json::from_str(&read(prefix, suffix)).unwrap()
}

fn csv(prefix: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = read(prefix, ".csv");
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect())
}

fn column(prefix: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = csv(prefix);
    let k = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[k]).collect()
}

#[test]
fn teleport_qubit_resolves_auto_gain() {
    let dir = TempDir::new().unwrap();
    let (code, out) = hqip(dir.path(), &["teleport-qubit", "r=1.01", "g=auto"]);
    assert_eq!(code, 0);
    let m = json(&out, ".manifest.json");
    assert!((m["resolved"]["g"].as_f64().unwrap() - 1.01f64.tanh()).abs() < 1e-15);
    assert_eq!(m["params"]["g"], "auto");
    assert_eq!(m["params"]["cutoff"], 3);
    let defaults: Vec<&str> = m["defaults"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(defaults.contains(&"cutoff") && !defaults.contains(&"r") && !defaults.contains(&"g"));
    let pop = json(&out, ".result.json")["results"]["output_population"].as_f64().unwrap();
    assert!((pop - 0.586).abs() < 1e-2);
}

#[test]
fn epr_row_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let (code, out) = hqip(dir.path(), &["epr-correlations", "--set", "r=1"]);
    assert_eq!(code, 0);
    let v = column(&out, "var_x2_minus_x3")[0];
    assert!((v - (-2.0f64).exp()).abs() < 1e-12);
}

#[test]
fn channel_equivalence_reports_small_distance() {
    let dir = TempDir::new().unwrap();
    let (code, out) = hqip(dir.path(), &["channel-equivalence", "r=0.7"]);
    assert_eq!(code, 0);
    let d = json(&out, ".result.json")["results"]["max_trace_distance"].as_f64().unwrap();
    assert!(d < 1e-2);
}

#[test]
fn coherent_sweep_follows_closed_form() {
    let dir = TempDir::new().unwrap();
    let (code, out) = hqip(dir.path(), &["teleport-coherent", "--sweep", "r=0,0.5,1"]);
    assert_eq!(code, 0);
    assert_eq!(column(&out, "r"), vec![0.0, 0.5, 1.0]);
    let g = column(&out, "fidelity_gaussian");
    for (f, want) in g.iter().zip([0.5, 1.0 / (1.0 + (-1.0f64).exp()), 1.0 / (1.0 + (-2.0f64).exp())]) {
        assert!((f - want).abs() < 1e-12);
    }
    let fock = column(&out, "fidelity_fock");
    assert!(fock.windows(2).all(|w| w[1] > w[0]));
    let m = json(&out, ".manifest.json");
    assert_eq!(m["sweep"]["param"], "r");
    assert_eq!(m["resolved"].as_array().unwrap().len(), 3);
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let (code, out) = hqip(dir.path(), &["teleport-coherent", "--sweep", "r="]);
    assert_eq!(code, 0);
    assert_eq!(read(&out, ".csv"), "r,gain,fidelity_gaussian,fidelity_fock,unit_gain_closed_form,leakage\n");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (_, a) = hqip(&dir.path().join("a"), &["teleport-dv", "seed=7", "samples=5"]);
    let (_, b) = hqip(&dir.path().join("b"), &["teleport-dv", "seed=7", "samples=5"]);
    assert_eq!(read(&a, ".result.json"), read(&b, ".result.json"));
    assert_eq!(read(&a, ".csv"), read(&b, ".csv"));
    let (_, c) = hqip(&dir.path().join("c"), &["teleport-dv", "seed=8", "samples=5"]);
    assert_ne!(read(&a, ".csv"), read(&c, ".csv"));
    assert!(read(&a, ".result.json").contains("\"bound\":1.0000000000000000e-10"));
}

#[test]
fn config_file_is_flat_key_value() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("nodes.conf");
    fs::write(&file, "# four-node chain\nnodes = 4\nr = 1.0  # node squeezing\n\n").unwrap();
    let (code, out) = hqip(dir.path(), &["cluster-nullifiers", "--config", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = column(&out, "variance");
    assert_eq!(v.len(), 4);
    assert!(v.iter().all(|x| (x - (-2.0f64).exp() / 2.0).abs() < 1e-8));
    fs::write(&file, "nodes = 4\ncolour = 2\n").unwrap();
    assert_eq!(hqip(dir.path(), &["cluster-nullifiers", "--config", file.to_str().unwrap()]).0, 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["no-such-experiment"][..],
        &["squeezer", "colour=1"],
        &["squeezer", "r=abc"],
        &["squeezer", "T=1.5"],
        &["cubic-gate", "cutoff=2.5"],
        &["epr-correlations", "r=auto"],
        &["teleport-coherent", "--sweep", "colour=1,2"],
        &["teleport-coherent", "--sweep", "r=0,x"],
        &["cluster-nullifiers", "nodes=40"],
    ] {
        assert_eq!(hqip(dir.path(), args).0, 2, "{args:?}");
    }
}

#[test]
fn tolerance_failures_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let (code, out) = hqip(dir.path(), &["teleport-coherent", "cutoff=2", "r=1"]);
    assert_eq!(code, 3);
    let checks = json(&out, ".result.json")["checks"].clone();
    assert!(checks.as_array().unwrap().iter().any(|c| c["pass"] == false));
}

#[test]
fn every_experiment_runs_with_defaults() {
    let dir = TempDir::new().unwrap();
    for e in ["teleport-dv", "cluster-nullifiers", "cluster-gate", "squeezer", "cubic-gate"] {
        let (code, out) = hqip(&dir.path().join(e), &[e]);
        assert_eq!(code, 0, "{e}");
        let m = json(&out, ".manifest.json");
        assert_eq!(m["experiment"], e);
        assert!(m["versions"]["hqip-core"].is_string() && m["seed"].is_u64());
    }
}

#[test]
fn cluster_gate_follows_ideal_means() {
    let dir = TempDir::new().unwrap();
    let (code, out) = hqip(dir.path(), &["cluster-gate", "z=0.8", "shear=0.4", "r=1.5"]);
    assert_eq!(code, 0);
    let (mx, tx) = (column(&out, "mean_x")[0], column(&out, "target_mean_x")[0]);
    assert!((mx - tx).abs() < 1e-9);
    assert!(column(&out, "fidelity")[0] > 0.5);
}
