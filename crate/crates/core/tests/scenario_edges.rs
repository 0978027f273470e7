//! Focused edge behaviors: remote input staging, the half-open analysis
//! window, dataset-file locality preference, and summary notes.

use std::collections::BTreeSet;

use gridsim_core::harness::run::{load_config_str, run_scenario};
use gridsim_core::harness::summary::summarize;
use gridsim_core::model::FileClass;
use gridsim_core::scenarios::t0t1;
use gridsim_core::scenarios::world::World;
use gridsim_core::scheduling::JobKind;

#[test]
fn remote_input_stages_then_computes() {
    // Two centers on an idle 1 Gbps zero-RTT link, no service delay: a job at
    // B with a 2000 MB input held only at A stages for exactly 16 s, then
    // runs its CPU phase (100 s of work on one CPU).
    let base = r#"
scenario = "t0t1"
seed = 1
duration = 1000.0
metrics_interval = 300.0

[[network.nodes]]
id = "A"
[[network.nodes]]
id = "B"

[[network.links]]
id = "ab"
from = "A"
to = "B"
rtt_ms = 0.0
capacity = 1e9

[[centers]]
id = "A"
service_time = 0.0
[[centers]]
id = "B"
service_time = 0.0

[activities.raw_replication]
enabled = false
destinations = ["B"]
"#;
    let cfg = load_config_str(base, "inline", &[]).expect("config loads");
    let mut world = World::build(cfg).expect("world builds");

    let (file, origin) = {
        let core = &mut world.core;
        let a = core.data.site_by_name("A").unwrap().clone();
        let b = core.data.site_by_name("B").unwrap().center;
        let file = core.data.create_file(
            FileClass::Raw,
            2_000_000_000,
            gridsim_core::SimTime::ZERO,
            (0, 0),
        );
        core.data.store(file, a.server).unwrap();
        (file, b)
    };
    t0t1::submit_job(&mut world.core, JobKind::Generic, 100.0 * 1e9, vec![file], origin)
        .unwrap();
    world.run().expect("run succeeds");

    let jobs = &world.core.metrics.jobs;
    assert_eq!(jobs.len(), 1);
    let job = &jobs[0];
    assert_eq!(job.t_submit, 0.0);
    assert_eq!(job.t_start, 16.0, "staging 1.6e10 bits over 1 Gbps");
    assert_eq!(job.t_end, 116.0, "then a 100 s CPU phase");
    assert!(!job.exported);
}

#[test]
fn analysis_window_is_half_open_on_the_left_edge() {
    // Files of exactly 20 MB appear every 10 s (t = 10, 20, ...). The gather
    // at US2 triggers at t = 1860 with a 1800 s window: [60, 1860). The file
    // created exactly at t = 60 is included; anything earlier is not, and the
    // trigger-time file cannot exist yet. 180 in-window files, 30 of them
    // local to US2, leave exactly 150 x 2e7 bytes to move.
    let base = r#"
scenario = "t0t1"
seed = 5
duration = 2600.0
metrics_interval = 300.0

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

[activities.raw_replication]
enabled = true
source = "T0"
recording_rate = 2e6
file_size_mean = 2e7
file_size_sd = 0.0
destinations = ["EU1", "EU2", "EU3", "US1", "US2", "JP"]

[activities.analysis]
enabled = true
centers = ["US2"]
local_start = "00:31"
window_hours = 0.5
max_parallel = 16

[activities.analysis.utc_offsets]
US2 = 0.0
"#;
    let cfg = load_config_str(base, "inline", &[]).expect("config loads");
    let result = run_scenario(cfg).expect("run succeeds");
    let analysis: Vec<_> = result
        .metrics
        .activities
        .iter()
        .filter(|a| a.activity == "detector_analysis")
        .collect();
    assert_eq!(analysis.len(), 1);
    assert_eq!(analysis[0].trigger, 1860.0);
    assert_eq!(
        analysis[0].bytes_moved, 150 * 20_000_000,
        "exactly the 150 non-local files created in [60, 1860)"
    );
}

#[test]
fn later_packets_of_a_fetched_file_resolve_locally() {
    // One slave works through 5 files of 2 packets each with p_local = 0.
    // Every file is fetched exactly once; its second packet is preferred to
    // the same station and resolves from the local copy.
    let base = r#"
scenario = "proof"
seed = 2
duration = 5000.0
metrics_interval = 300.0

[proof]
masters = 1
slave_stations = 1
data_servers = 1
slaves_per_master = 1
p_local = 0.0
packet_events = 100
dataset_files = 5
packets_per_file = 2
file_bytes = 1_000_000
master_handle_time = 0.01
server_service_time = 0.1
request_cpu_work = 1e10
repeat_requests = false
think_time_mean = 300.0
lan_bandwidth = 1e9
station_cpu_ops = 1e9
station_cores = 1
"#;
    let cfg = load_config_str(base, "inline", &[]).expect("config loads");
    let result = run_scenario(cfg).expect("run succeeds");
    assert_eq!(result.stats.proof_requests_completed, 1);
    assert_eq!(result.stats.proof_server_fetches, 5, "each file fetched once");
    assert_eq!(result.stats.proof_local_hits, 5, "second packets hit the local copy");
    assert_eq!(result.metrics.transfers.len(), 5);
    let files: BTreeSet<&String> =
        result.metrics.transfers.iter().map(|t| &t.file_id).collect();
    assert_eq!(files.len(), 5, "no file moved twice");
}

#[test]
fn job_with_unreplicated_input_fails_and_is_counted() {
    let base = r#"
scenario = "t0t1"
seed = 1
duration = 50.0
metrics_interval = 25.0

[[network.nodes]]
id = "A"
[[network.nodes]]
id = "B"

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

[activities.raw_replication]
enabled = false
destinations = ["B"]
"#;
    let cfg = load_config_str(base, "inline", &[]).expect("config loads");
    let mut world = World::build(cfg).expect("world builds");
    let (orphan, origin) = {
        let core = &mut world.core;
        let b = core.data.site_by_name("B").unwrap().center;
        // Cataloged but never stored anywhere: no replica to stage from.
        let file = core.data.create_file(
            FileClass::Raw,
            1_000_000,
            gridsim_core::SimTime::ZERO,
            (0, 0),
        );
        (file, b)
    };
    t0t1::submit_job(&mut world.core, JobKind::Generic, 1e9, vec![orphan], origin)
        .unwrap();
    world.run().expect("run completes despite the failed job");
    assert_eq!(world.core.metrics.job_failures, 1);
    assert!(world.core.metrics.jobs.is_empty(), "failed jobs emit no completion row");
}

#[test]
fn summary_notes_absent_dst_rows() {
    let base = r#"
scenario = "t0t1"
seed = 1
duration = 120.0
metrics_interval = 60.0

[[network.nodes]]
id = "A"
[[network.nodes]]
id = "B"

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

[activities.raw_replication]
enabled = true
source = "A"
recording_rate = 2e8
file_size_mean = 2e9
file_size_sd = 0.0
destinations = ["B"]
"#;
    let cfg = load_config_str(base, "inline", &[]).expect("config loads");
    let result = run_scenario(cfg).expect("run succeeds");
    let summary = summarize(&result.metrics);
    assert!(summary.all_series.contains_key("RAW"));
    assert!(!summary.all_series.contains_key("DST"));
    assert!(summary.notes.iter().any(|n| n.contains("DST")), "absence is noted");
    assert!(!summary
        .per_destination
        .keys()
        .any(|(class, _)| class == "DST"));
}
