use std::path::Path;

use irsvr::scenario::load_scenario_file;
use irsvr::{Error, Scenario, ScenarioDocument};

fn config(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_config_matches_builtin_default() {
    let (doc, scenario) = load_scenario_file::<f64>(&config("default.toml")).unwrap();
    assert_eq!(doc, ScenarioDocument::default_indoor());
    assert_eq!(scenario, Scenario::<f64>::default_indoor());
    assert_eq!(scenario.codebooks.scenarios.len(), 6);
}

#[test]
fn toml_round_trip_is_lossless() {
    let doc = ScenarioDocument::default_indoor();
    assert_eq!(ScenarioDocument::parse(&doc.to_toml()).unwrap(), doc);
}

#[test]
fn unknown_keys_are_rejected() {
    let text = std::fs::read_to_string(config("default.toml")).unwrap();
    let bad = text.replace("[io]", "[io]\nsnr_cvs = \"typo.csv\"");
    assert!(ScenarioDocument::parse(&bad).is_err());
}

#[test]
fn missing_file_reports_path() {
    match load_scenario_file::<f64>(Path::new("/nonexistent/scenario.toml")) {
        Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("/nonexistent/scenario.toml")),
        other => panic!("expected io error, got {other:?}"),
    }
}

#[test]
fn single_precision_default_loads() {
    let s = Scenario::<f32>::default_indoor();
    assert_eq!(s.n_elements(), 24);
    assert_eq!(s.n_users(), 4);
}
