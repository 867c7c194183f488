//! Analytical results against load-flow sampling, and the command-line
//! contract (exit codes, output files, manifest).

use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};
use stpvsa::feeder::ieee;
use stpvsa::hosting_capacity::{hc_loadflow, HCConfig};
use stpvsa::monte_carlo::{self, ScenarioConfig};
use stpvsa::power_flow;
use stpvsa::st_pvsa::future_voltage_distribution;

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stpvsa")).args(args).output().unwrap()
}

#[test]
fn overvoltage_probability_at_forty_percent() {
    let net = ieee::ieee37().unwrap();
    let base = power_flow::solve(&net, None).unwrap();
    let mut cfg = ScenarioConfig::nine_actor_default(&net, 20_000, 4).unwrap();
    cfg.mean_kw = [-0.4 * net.total_demand_kw() / 9.0, 0.0, 0.0];
    let (m, _) = monte_carlo::analytical_distribution(&net, &base, &cfg).unwrap();
    let o = cfg.observation;
    let analytic = future_voltage_distribution(base.v[o][0], &m).unwrap().sf(1.05);
    let emp = monte_carlo::empirical_voltage_distribution(&net, &base, &cfg).unwrap();
    let freq = emp.future_v.iter().filter(|&&v| v > 1.05).count() as f64 / emp.future_v.len() as f64;
    assert!((analytic - freq).abs() <= 0.05, "analytic {analytic} vs sampled {freq}");
    assert!(freq > 0.05 && freq < 0.95, "test point should not be degenerate: {freq}");
}

#[test]
fn more_scenarios_do_not_raise_the_median() {
    let net = ieee::ieee37().unwrap();
    let median = |scenarios: usize| {
        let mut v: Vec<f64> = (0..5)
            .map(|seed| {
                let cfg = HCConfig {
                    scenarios,
                    seed,
                    ..HCConfig::default()
                };
                hc_loadflow(&net, &cfg).unwrap().hc_percent
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v[2]
    };
    assert!(median(1000) <= median(100));
}

#[test]
fn exit_codes() {
    let missing = cli(&["--feeder", "/definitely/missing.feeder", "loadflow"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());
    assert_eq!(cli(&["validate-dist", "--n", "0"]).status.code(), Some(2));
    assert_eq!(cli(&["loadflow", "--tol", "1e-16", "--max-iter", "1"]).status.code(), Some(1));
    assert_eq!(cli(&["--feeder", "ieee37", "loadflow"]).status.code(), Some(0));
}

#[test]
fn feeder_file_and_bundled_name_agree() {
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ieee123.feeder");
    let a = cli(&["--feeder", file.to_str().unwrap(), "--format", "csv", "loadflow"]);
    let b = cli(&["--feeder", "ieee123", "--format", "csv", "loadflow"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let net = ieee::ieee123().unwrap();
    let phases: usize = (0..net.len()).map(|k| net.phases(k).len()).sum();
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 1 + phases);
}

#[test]
fn out_dir_gets_results_and_manifest() {
    let dir = std::env::temp_dir().join(format!("stpvsa-cli-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let out = cli(&[
        "--out-dir",
        dir.to_str().unwrap(),
        "--seed",
        "5",
        "hc",
        "--method",
        "loadflow",
        "--scenarios",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("hc.json")).unwrap()).unwrap();
    let hc = result["hc_percent"].as_f64().unwrap();
    assert!((1.0..=100.0).contains(&hc));
    assert_eq!(result["records"].as_array().unwrap().len(), 100);
    let trace = std::fs::read_to_string(dir.join("hc_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 101);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["command"], "hc");
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ieee37.feeder")).unwrap();
    let digest: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(manifest["feeder_sha256"], digest.as_str());
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn validate_dist_reports_js_distance() {
    let out = cli(&["validate-dist", "--n", "20000"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let js = v["js_distance"].as_f64().unwrap();
    assert!(js > 0.0 && js <= 0.25, "{js}");
    assert_eq!(v["distribution"]["family"], "nakagami");
}
