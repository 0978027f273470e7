//! End-to-end behavior of the tiered replication scenario.

use gridsim_core::harness::metrics::transfers_csv;
use gridsim_core::harness::run::{load_config_str, run_scenario};

/// A scaled-down tiered scenario: same topology shape, shorter horizon.
fn base_config(duration: f64) -> String {
    format!(
        r#"
scenario = "t0t1"
seed = 7
duration = {duration}
metrics_interval = 300.0

[network]
window_bytes = 8e6

[[network.nodes]]
id = "T0"
[[network.nodes]]
id = "MR"
[[network.nodes]]
id = "EU1"
[[network.nodes]]
id = "EU2"
[[network.nodes]]
id = "EU3"
[[network.nodes]]
id = "US1"
[[network.nodes]]
id = "US2"
[[network.nodes]]
id = "JP"

[[network.links]]
id = "T0-MR"
from = "T0"
to = "MR"
rtt_ms = 0.0
capacity = 20e9

[[network.links]]
id = "EU1-MR"
from = "EU1"
to = "MR"
rtt_ms = 20.0
capacity = 10e9

[[network.links]]
id = "EU2-MR"
from = "EU2"
to = "MR"
rtt_ms = 25.0
capacity = 10e9

[[network.links]]
id = "EU3-MR"
from = "EU3"
to = "MR"
rtt_ms = 30.0
capacity = 10e9

[[network.links]]
id = "T0-US1"
from = "T0"
to = "US1"
rtt_ms = 120.0
capacity = 10e9

[[network.links]]
id = "US1-US2"
from = "US1"
to = "US2"
rtt_ms = 60.0
capacity = 10e9

[[network.links]]
id = "US1-JP"
from = "US1"
to = "JP"
rtt_ms = 240.0
capacity = 10e9

[[centers]]
id = "T0"
cpus = 200
disk_bytes = 10_000_000_000_000

[[centers]]
id = "EU1"
[[centers]]
id = "EU2"
[[centers]]
id = "EU3"
[[centers]]
id = "US1"
[[centers]]
id = "US2"
[[centers]]
id = "JP"

[agents]
enabled = true

[agents.relays]
US1 = ["US2", "JP"]
T0 = ["EU1", "EU2", "EU3"]

[activities.raw_replication]
enabled = true
source = "T0"
recording_rate = 2e8
file_size_mean = 2e9
file_size_sd = 0.10
destinations = ["EU1", "EU2", "EU3", "US1", "US2", "JP"]

[activities.production]
enabled = true
dst_ratio = 0.1
dst_sd = 0.10
cpu_work_per_raw = 1.2e12
"#
    )
}

fn with_overrides(base: &str, overrides: &[(&str, &str)]) -> gridsim_core::harness::ScenarioCfg {
    let pairs: Vec<(String, String)> =
        overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    load_config_str(base, "test", &pairs).expect("config loads")
}

#[test]
fn raw_files_round_robin_over_destinations() {
    // sd = 0: every file is exactly 2 GB, one every 10 s, cycling through the
    // six destinations with the seventh wrapping back to the first. The
    // horizon leaves room for the slowest (window-capped) paths to drain.
    let cfg = with_overrides(
        &base_config(300.0),
        &[
            ("activities.raw_replication.file_size_sd", "0.0"),
            ("activities.production.enabled", "false"),
        ],
    );
    let result = run_scenario(cfg).expect("run succeeds");
    let mut raws: Vec<_> =
        result.metrics.transfers.iter().filter(|t| t.class == "RAW").collect();
    raws.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    assert!(raws.len() >= 7, "expected at least 7 delivered RAW files");
    let order: Vec<&str> = raws.iter().take(7).map(|t| t.dst.as_str()).collect();
    assert_eq!(order, vec!["EU1", "EU2", "EU3", "US1", "US2", "JP", "EU1"]);
    for (i, t) in raws.iter().take(7).enumerate() {
        assert_eq!(t.size_bytes, 2_000_000_000);
        assert!((t.t_start - (i as f64 + 1.0) * 10.0).abs() < 1e-6, "exact 10 s cadence");
    }
    assert!(result.audit_violations.is_empty(), "{:?}", result.audit_violations);
}

#[test]
fn mean_interfile_interval_matches_recording_rate() {
    let cfg = with_overrides(&base_config(3600.0), &[("activities.production.enabled", "false")]);
    let result = run_scenario(cfg).expect("run succeeds");
    let raws: Vec<_> =
        result.metrics.transfers.iter().filter(|t| t.class == "RAW").collect();
    assert!(raws.len() > 300, "about 360 files in an hour");
    let first = raws.first().unwrap().t_start;
    let last = raws.last().unwrap().t_start;
    let mean_interval = (last - first) / (raws.len() - 1) as f64;
    assert!(
        (mean_interval - 10.0).abs() < 0.5,
        "mean inter-file interval {mean_interval} vs 10 s"
    );
}

#[test]
fn production_makes_dsts_a_tenth_the_size() {
    let cfg = with_overrides(
        &base_config(300.0),
        &[
            ("activities.raw_replication.file_size_sd", "0.0"),
            ("activities.production.dst_sd", "0.0"),
            ("activities.production.cpu_work_per_raw", "1e10"),
        ],
    );
    let result = run_scenario(cfg).expect("run succeeds");
    let dsts: Vec<_> =
        result.metrics.transfers.iter().filter(|t| t.class == "DST").collect();
    assert!(!dsts.is_empty());
    for t in &dsts {
        assert_eq!(t.size_bytes, 200_000_000, "2000 MB RAW -> 200 MB DST");
    }
}

/// Transatlantic bytes per DST fan-out: with the relay plan the link carries
/// each file once; without it, once per US-side destination (3x).
#[test]
fn agent_relays_cross_the_expensive_link_once() {
    for (enabled, expected_crossings) in [(true, 1u64), (false, 3u64)] {
        let agents = if enabled { "true" } else { "false" };
        let cfg = with_overrides(
            &base_config(120.0),
            &[
                ("agents.enabled", agents),
                ("activities.raw_replication.file_size_sd", "0.0"),
                ("activities.raw_replication.recording_rate", "2e9"),
                ("activities.production.dst_sd", "0.0"),
                ("activities.production.cpu_work_per_raw", "1e9"),
            ],
        );
        let result = run_scenario(cfg).expect("run succeeds");
        // Only fan-outs with all six copies delivered by the horizon count;
        // partial groups would undercount crossings.
        let us_side = ["US1", "US2", "JP"];
        let dsts: Vec<_> =
            result.metrics.transfers.iter().filter(|t| t.class == "DST").collect();
        assert!(!dsts.is_empty());
        let mut copies_per_file = std::collections::BTreeMap::new();
        for t in &dsts {
            *copies_per_file.entry(t.file_id.clone()).or_insert(0u64) += 1;
        }
        let complete: std::collections::BTreeSet<&String> = copies_per_file
            .iter()
            .filter(|(_, &count)| count == 6)
            .map(|(file, _)| file)
            .collect();
        assert!(!complete.is_empty());
        let crossings = dsts
            .iter()
            .filter(|t| complete.contains(&t.file_id))
            .filter(|t| {
                us_side.contains(&t.src.as_str()) != us_side.contains(&t.dst.as_str())
            })
            .count() as u64;
        assert_eq!(
            crossings,
            expected_crossings * complete.len() as u64,
            "agents={enabled}: each fan-out crosses the transatlantic link {expected_crossings}x"
        );
        assert!(result.audit_violations.is_empty(), "{:?}", result.audit_violations);
    }
}

#[test]
fn reproduction_splits_raw_files_evenly() {
    // 60 RAW files at one per second, then reproduction from t=70 on: each
    // of the six tier-1 centers reprocesses exactly the 10 files it holds.
    // 200 MB files every 10 s: the 60th file is created at t=600 and even the
    // slowest window-capped delivery (9 s to JP) settles before reprocessing
    // starts at t=610: exactly 60 files held, ten per center.
    let extra = r#"
[activities.reproduction]
enabled = true
start_time = 610.0
cpu_work_per_raw = 1e10
max_concurrent = 60
"#;
    let base = format!("{}{}", base_config(700.0), extra);
    let cfg = with_overrides(
        &base,
        &[
            ("activities.raw_replication.file_size_sd", "0.0"),
            ("activities.raw_replication.file_size_mean", "2e8"),
            ("activities.raw_replication.recording_rate", "2e7"),
            ("activities.production.enabled", "false"),
        ],
    );
    let result = run_scenario(cfg).expect("run succeeds");
    let repro_jobs: Vec<_> = result
        .metrics
        .jobs
        .iter()
        .filter(|j| j.kind == "reproduction" && j.t_submit == 610.0)
        .collect();
    assert_eq!(repro_jobs.len(), 60);
    let mut per_center = std::collections::BTreeMap::new();
    for job in &repro_jobs {
        *per_center.entry(job.center.clone()).or_insert(0u32) += 1;
    }
    // 60 files round-robined over six centers: exactly ten each.
    for center in ["EU1", "EU2", "EU3", "US1", "US2", "JP"] {
        let count = per_center.get(center).copied().unwrap_or(0);
        assert_eq!(count, 10, "center {center} reprocessed {count} files");
    }
}

#[test]
fn analysis_trigger_time_honors_utc_offset() {
    // UTC+9 with 09:00 local start means the trigger lands at t=0; a +7.5h
    // offset and 09:30 local start lands at t=7200.
    let extra = r#"
[activities.analysis]
enabled = true
centers = ["JP"]
local_start = "09:30"
window_hours = 1.0
max_parallel = 8

[activities.analysis.utc_offsets]
JP = 9.0
"#;
    let base = format!("{}{}", base_config(3600.0), extra);
    let cfg = with_overrides(&base, &[("activities.production.enabled", "false")]);
    let result = run_scenario(cfg).expect("run succeeds");
    let analysis: Vec<_> = result
        .metrics
        .activities
        .iter()
        .filter(|a| a.activity == "detector_analysis")
        .collect();
    assert_eq!(analysis.len(), 1);
    // (09:30 local - 9 h offset) mod 24 h = 00:30 UTC = t=1800.
    assert_eq!(analysis[0].trigger, 1800.0);
    assert!(analysis[0].bytes_moved > 0, "fetched the remote share of the window");
    assert!(analysis[0].completion > analysis[0].trigger);
}

#[test]
fn analysis_with_empty_window_completes_instantly() {
    let extra = r#"
[activities.analysis]
enabled = true
centers = ["US2"]
local_start = "00:10"
window_hours = 0.001
max_parallel = 8

[activities.analysis.utc_offsets]
US2 = 0.0
"#;
    let base = format!("{}{}", base_config(1200.0), extra);
    let cfg = with_overrides(
        &base,
        &[
            ("activities.production.enabled", "false"),
            ("activities.raw_replication.enabled", "false"),
        ],
    );
    let result = run_scenario(cfg).expect("run succeeds");
    let analysis: Vec<_> = result
        .metrics
        .activities
        .iter()
        .filter(|a| a.activity == "detector_analysis")
        .collect();
    assert_eq!(analysis.len(), 1);
    assert_eq!(analysis[0].trigger, 600.0);
    assert_eq!(analysis[0].completion, 600.0, "no in-window files: instant completion");
    assert_eq!(analysis[0].bytes_moved, 0);
}

#[test]
fn reruns_are_byte_identical() {
    let run_csv = || {
        let cfg = with_overrides(&base_config(900.0), &[]);
        let result = run_scenario(cfg).expect("run succeeds");
        transfers_csv(&result.metrics.transfers)
    };
    assert_eq!(run_csv(), run_csv());
}

#[test]
fn different_seeds_differ() {
    let run_csv = |seed: &str| {
        let cfg = with_overrides(&base_config(900.0), &[("seed", seed)]);
        let result = run_scenario(cfg).expect("run succeeds");
        transfers_csv(&result.metrics.transfers)
    };
    assert_ne!(run_csv("7"), run_csv("8"));
}

#[test]
fn audits_hold_on_a_mixed_run() {
    let extra = r#"
[activities.reproduction]
enabled = true
start_time = 600.0
cpu_work_per_raw = 1e11
max_concurrent = 30

[activities.analysis]
enabled = true
centers = ["JP"]
local_start = "09:20"
window_hours = 0.25
max_parallel = 8

[activities.analysis.utc_offsets]
JP = 9.0
"#;
    let base = format!("{}{}", base_config(1500.0), extra);
    let cfg = with_overrides(&base, &[]);
    let result = run_scenario(cfg).expect("run succeeds");
    assert!(result.audit_violations.is_empty(), "{:?}", result.audit_violations);
    assert_eq!(result.metrics.job_failures, 0);
    assert!(result.report.events_processed > 0);
}

#[test]
fn tiny_duration_produces_headers_only() {
    let cfg = with_overrides(&base_config(0.001), &[]);
    let result = run_scenario(cfg).expect("run succeeds");
    let csv = transfers_csv(&result.metrics.transfers);
    assert_eq!(csv, "file_id,class,src,dst,size_bytes,t_start_s,t_end_s\n");
}

#[test]
fn summary_all_series_matches_recomputation_from_csv() {
    let cfg = with_overrides(
        &base_config(600.0),
        &[("activities.production.cpu_work_per_raw", "1e9")],
    );
    let result = run_scenario(cfg).expect("run succeeds");
    let csv = transfers_csv(&result.metrics.transfers);

    // Recompute the DST all-series mean from the rendered CSV text.
    let mut durations = Vec::new();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[1] == "DST" {
            let start: f64 = cols[5].parse().unwrap();
            let end: f64 = cols[6].parse().unwrap();
            durations.push(end - start);
        }
    }
    // CSV times carry six decimals, so recomputation can differ by ~1e-6 s.
    let recomputed = durations.iter().sum::<f64>() / durations.len() as f64;
    let reported = result.summary.all_series["DST"];
    assert!(
        (recomputed - reported).abs() <= 1e-5,
        "summary {reported} vs recomputed {recomputed}"
    );
    // And the count-weighted mean of per-destination means agrees.
    let mut weighted = 0.0;
    let mut count = 0u64;
    for ((class, _), stats) in &result.summary.per_destination {
        if class == "DST" {
            weighted += stats.mean * stats.count as f64;
            count += stats.count;
        }
    }
    let weighted_mean = weighted / count as f64;
    assert!((weighted_mean - reported).abs() <= 1e-9 * reported.abs().max(1.0));
}
