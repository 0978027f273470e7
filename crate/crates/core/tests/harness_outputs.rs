//! Config loading/validation examples, output files, and reproducibility.

use std::path::Path;

use gridsim_core::harness::config::ScenarioCfg;
use gridsim_core::harness::run::{expand_sweeps, load_config, load_config_str, run_to_dir};

fn repo_config(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_tiered_config_loads_with_table_rtts() {
    let cfg = load_config(&repo_config("t0t1.cfg"), &[]).expect("shipped config loads");
    assert_eq!(cfg.scenario, "t0t1");
    // Six tier-1 centers plus the source.
    let raw = cfg.activities.raw_replication.as_ref().unwrap();
    assert_eq!(raw.destinations.len(), 6);
    assert_eq!(raw.source, "T0");
    // The WAN round-trip table ships as link configuration.
    let rtt_of = |id: &str| {
        cfg.network.links.iter().find(|l| l.id == id).map(|l| l.rtt_ms).unwrap()
    };
    assert_eq!(rtt_of("EU1-MR"), 20.0);
    assert_eq!(rtt_of("EU2-MR"), 25.0);
    assert_eq!(rtt_of("EU3-MR"), 30.0);
    assert_eq!(rtt_of("T0-US1"), 120.0);
    assert_eq!(rtt_of("US1-US2"), 60.0);
    assert_eq!(rtt_of("US1-JP"), 240.0);
    // Defaults materialize into the resolved echo.
    let resolved = cfg.to_resolved_toml();
    assert!(resolved.contains("window_bytes = 8000000.0"));
    assert!(resolved.contains("threshold = 0.8"));
}

#[test]
fn shipped_proof_config_loads() {
    let cfg = load_config(&repo_config("proof.cfg"), &[]).expect("shipped config loads");
    let proof = cfg.proof.as_ref().unwrap();
    assert_eq!(proof.masters, 20);
    assert_eq!(proof.slave_stations, 500);
    assert_eq!(proof.slaves_per_master, 25);
    assert_eq!(proof.think_time_mean, 300.0);
}

#[test]
fn negative_capacity_is_rejected_naming_the_link() {
    let text = std::fs::read_to_string(repo_config("t0t1.cfg")).unwrap();
    let err = load_config_str(
        &text,
        "t0t1.cfg",
        &[("network.links[US1-JP].capacity".to_string(), "-1.0".to_string())],
    )
    .unwrap_err();
    let message = err.to_string();
    assert!(message.contains("US1-JP"), "error names the offending link: {message}");
}

#[test]
fn relay_cycle_is_rejected() {
    let text = std::fs::read_to_string(repo_config("t0t1.cfg")).unwrap();
    let err = load_config_str(
        &text,
        "t0t1.cfg",
        &[
            ("agents.relays.US1".to_string(), "[\"US2\"]".to_string()),
            ("agents.relays.US2".to_string(), "[\"US1\"]".to_string()),
        ],
    )
    .unwrap_err();
    let message = err.to_string();
    assert!(message.contains("relays"), "{message}");
}

#[test]
fn unknown_scenario_kind_is_rejected() {
    let err = ScenarioCfg::from_toml_str("scenario = \"mesh\"\nduration = 10.0", "inline")
        .unwrap_err();
    assert!(err.to_string().contains("scenario"));
}

#[test]
fn zero_duration_is_rejected() {
    let text = std::fs::read_to_string(repo_config("proof.cfg")).unwrap();
    let err =
        load_config_str(&text, "proof.cfg", &[("duration".to_string(), "0.0".to_string())])
            .unwrap_err();
    assert!(err.to_string().contains("duration"));
}

#[test]
fn disconnected_center_is_a_validation_error() {
    let base = r#"
scenario = "t0t1"
seed = 1
duration = 10.0

[[network.nodes]]
id = "A"
[[network.nodes]]
id = "B"
[[network.nodes]]
id = "X"

[[network.links]]
id = "ab"
from = "A"
to = "B"
rtt_ms = 0.0
capacity = 1e9

[[centers]]
id = "A"
[[centers]]
id = "B"
[[centers]]
id = "X"
"#;
    let err = load_config_str(base, "inline", &[]).unwrap_err();
    let message = err.to_string();
    assert!(message.contains("no path"), "{message}");
    assert!(message.contains('X'), "{message}");
}

#[test]
fn undercovered_proof_stations_are_a_validation_error() {
    let text = std::fs::read_to_string(repo_config("proof.cfg")).unwrap();
    let err = load_config_str(
        &text,
        "proof.cfg",
        &[("proof.slaves_per_master".to_string(), "10".to_string())],
    )
    .unwrap_err();
    assert!(err.to_string().contains("slave station"), "{err}");
}

#[test]
fn sweep_expansion_is_a_cartesian_product() {
    let sweeps = vec![
        ("a.b".to_string(), vec!["1".to_string(), "2".to_string()]),
        ("c".to_string(), vec!["x".to_string()]),
    ];
    let points = expand_sweeps(&sweeps);
    assert_eq!(points.len(), 2);
    assert_eq!(points[0].0, "b=1,c=x");
    assert_eq!(points[1].0, "b=2,c=x");
    assert_eq!(points[0].1.len(), 2);
}

#[test]
fn output_directory_is_complete_and_rerun_identical() {
    let text = std::fs::read_to_string(repo_config("t0t1.cfg")).unwrap();
    let overrides = [("duration".to_string(), "900.0".to_string())];
    let tmp = std::env::temp_dir().join("gridsim-test-outputs");
    let _ = std::fs::remove_dir_all(&tmp);

    let run_once = |dir: &Path| {
        let cfg = load_config_str(&text, "t0t1.cfg", &overrides).unwrap();
        run_to_dir(cfg, dir).expect("run succeeds")
    };
    let first = run_once(&tmp.join("a"));
    let second = run_once(&tmp.join("b"));
    assert!(first.audit_violations.is_empty());
    assert_eq!(first.report.events_processed, second.report.events_processed);

    for name in
        ["transfers.csv", "links.csv", "cpu.csv", "jobs.csv", "activities.csv", "summary.txt", "resolved_config.toml"]
    {
        let a = std::fs::read(tmp.join("a").join(name)).expect(name);
        let b = std::fs::read(tmp.join("b").join(name)).expect(name);
        assert_eq!(a, b, "{name} differs between identical runs");
        assert!(!a.is_empty());
    }
    let _ = std::fs::remove_dir_all(&tmp);
}

#[test]
fn resolved_config_reloads_to_the_same_run() {
    // The echoed config is itself a valid scenario that reproduces the run.
    let text = std::fs::read_to_string(repo_config("t0t1.cfg")).unwrap();
    let cfg = load_config_str(
        &text,
        "t0t1.cfg",
        &[("duration".to_string(), "600.0".to_string())],
    )
    .unwrap();
    let resolved = cfg.to_resolved_toml();
    let reloaded = ScenarioCfg::from_toml_str(&resolved, "resolved").expect("round-trips");
    assert_eq!(cfg.seed, reloaded.seed);
    assert_eq!(cfg.duration, reloaded.duration);
    assert_eq!(cfg.centers.len(), reloaded.centers.len());
}
