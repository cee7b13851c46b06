use std::path::Path;

use infidelay::scenario::{load_scenario, run_scenario, RunOptions, Scenario};
use serde_json::Value;

#[test]
fn rerunning_the_embedded_scenario_reproduces_the_report() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/geometric-semigroup.json");
    let scenario = load_scenario(&path).unwrap();
    let opts = RunOptions { tolerance_scale: 1.0, seed: 11 };
    let first = serde_json::to_string(&run_scenario(&scenario, opts).report).unwrap();

    let parsed: Value = serde_json::from_str(&first).unwrap();
    let echoed: Scenario = serde_json::from_value(parsed["scenario"].clone()).unwrap();
    let opts = RunOptions { tolerance_scale: parsed["tolerance_scale"].as_f64().unwrap(), seed: parsed["seed"].as_u64().unwrap() };
    let second = serde_json::to_string(&run_scenario(&echoed, opts).report).unwrap();
    assert_eq!(first, second);
}

#[test]
fn runs_are_deterministic_for_a_seed() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/weighted-embedding.json");
    let scenario = load_scenario(&path).unwrap();
    let opts = RunOptions { tolerance_scale: 1.0, seed: 3 };
    let a = serde_json::to_string(&run_scenario(&scenario, opts).report).unwrap();
    let b = serde_json::to_string(&run_scenario(&scenario, opts).report).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tolerance_scale_loosens_point_checks() {
    let text = r#"{"name": "near", "problem": {"a": 0.0, "family": {"kind": "finite-support", "b": [-1.0], "tau": {"c": 0.0, "delta": 1.0}}, "history": {"preset": "constant", "value": 1.0}}, "horizon": 1.0,
        "checks": [{"check": "solve", "expect": [{"t": 1.0, "x": 1e-5, "tol": 1e-6}]}]}"#;
    let scenario = infidelay::scenario::parse_scenario(text, Path::new("near.json")).unwrap();
    assert!(!run_scenario(&scenario, RunOptions::default()).report.pass);
    assert!(run_scenario(&scenario, RunOptions { tolerance_scale: 100.0, seed: 0 }).report.pass);
}
