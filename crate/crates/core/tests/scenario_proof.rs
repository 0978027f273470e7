//! End-to-end behavior of the master/slave cluster scenario.

use gridsim_core::harness::run::{load_config_str, run_scenario};

fn proof_config(overrides: &[(&str, &str)]) -> gridsim_core::harness::ScenarioCfg {
    let base = r#"
scenario = "proof"
seed = 11
duration = 4000.0
metrics_interval = 300.0

[proof]
masters = 2
slave_stations = 10
data_servers = 1
slaves_per_master = 5
p_local = 0.5
packet_events = 1000
dataset_files = 20
packets_per_file = 1
file_bytes = 10_000_000
master_handle_time = 0.05
server_service_time = 0.5
request_cpu_work = 2e11
repeat_requests = false
think_time_mean = 300.0
lan_bandwidth = 1e9
station_cpu_ops = 1e9
station_cores = 1
"#;
    let pairs: Vec<(String, String)> =
        overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    load_config_str(base, "test", &pairs).expect("config loads")
}

#[test]
fn all_local_data_means_no_server_traffic() {
    let cfg = proof_config(&[("proof.p_local", "1.0")]);
    let result = run_scenario(cfg).expect("run succeeds");
    assert_eq!(result.stats.proof_requests_completed, 2);
    assert_eq!(result.stats.proof_server_fetches, 0);
    assert!(result.metrics.transfers.is_empty(), "no LAN data traffic");
    assert_eq!(result.stats.proof_local_hits, 40, "every packet resolved locally");
}

#[test]
fn no_local_data_means_every_packet_hits_a_server() {
    let cfg = proof_config(&[("proof.p_local", "0.0")]);
    let result = run_scenario(cfg).expect("run succeeds");
    assert_eq!(result.stats.proof_requests_completed, 2);
    assert_eq!(result.stats.proof_local_hits, 0);
    assert_eq!(result.stats.proof_server_fetches, 40, "20 files x 2 requests");
    assert_eq!(result.metrics.transfers.len(), 40);
}

#[test]
fn local_hit_fraction_matches_p_local_binomially() {
    // ~10^4 packets at p_local = 0.3: the observed local fraction must fall
    // inside the 3-sigma binomial envelope.
    let cfg = proof_config(&[
        ("proof.masters", "5"),
        ("proof.slave_stations", "50"),
        ("proof.slaves_per_master", "10"),
        ("proof.dataset_files", "2000"),
        ("proof.p_local", "0.3"),
        ("proof.file_bytes", "1000000"),
        ("proof.server_service_time", "0.002"),
        ("proof.master_handle_time", "0.002"),
        ("proof.request_cpu_work", "2e10"),
        ("proof.data_servers", "4"),
        ("duration", "100000.0"),
    ]);
    let result = run_scenario(cfg).expect("run succeeds");
    let hits = result.stats.proof_local_hits as f64;
    let total = (result.stats.proof_local_hits + result.stats.proof_server_fetches) as f64;
    assert!(total >= 10_000.0, "expected 10000 packets, saw {total}");
    let p = 0.3;
    let sigma = (p * (1.0 - p) / total).sqrt();
    let fraction = hits / total;
    assert!(
        (fraction - p).abs() <= 3.0 * sigma,
        "local fraction {fraction} outside {p} +/- {}",
        3.0 * sigma
    );
}

#[test]
fn master_serializes_messages_at_handle_time_granularity() {
    // One master, two slaves on separate stations, everything local and the
    // compute phase negligible (1 op). With handle time 0.1 the message
    // sequence is: client [0,.1], work0 [.1,.2], work1 [.2,.3] (both results
    // arrive during these handlings), result0 [.3,.4], idle-work0 [.4,.5],
    // result1 [.5,.6] -- the request completes exactly at 0.6.
    let cfg = proof_config(&[
        ("proof.masters", "1"),
        ("proof.slave_stations", "2"),
        ("proof.slaves_per_master", "2"),
        ("proof.dataset_files", "2"),
        ("proof.p_local", "1.0"),
        ("proof.master_handle_time", "0.1"),
        ("proof.request_cpu_work", "2.0"),
        ("duration", "100.0"),
    ]);
    let result = run_scenario(cfg).expect("run succeeds");
    let requests: Vec<_> = result
        .metrics
        .activities
        .iter()
        .filter(|a| a.activity == "proof_request")
        .collect();
    assert_eq!(requests.len(), 1);
    assert_eq!(requests[0].trigger, 0.0);
    assert!(
        (requests[0].completion - 0.6).abs() < 1e-9,
        "six serialized handlings of 0.1 s: completion at {}",
        requests[0].completion
    );
}

#[test]
fn work_conservation_per_request() {
    let cfg = proof_config(&[("proof.repeat_requests", "true"), ("duration", "3000.0")]);
    let result = run_scenario(cfg).expect("run succeeds");
    assert!(result.stats.proof_requests_completed >= 2);
    // Completed requests account for all their packets: the end-of-run audit
    // would flag any mismatch.
    assert!(result.audit_violations.is_empty(), "{:?}", result.audit_violations);
    // Every processed packet was either a local hit or a server fetch.
    let packets_accounted = result.stats.proof_local_hits + result.stats.proof_server_fetches;
    let packets_completed = result.stats.proof_requests_completed * 20;
    assert!(packets_accounted >= packets_completed);
}

#[test]
fn repeated_requests_are_think_time_separated() {
    let cfg = proof_config(&[("proof.repeat_requests", "true"), ("duration", "4000.0")]);
    let result = run_scenario(cfg).expect("run succeeds");
    let mut requests: Vec<_> = result
        .metrics
        .activities
        .iter()
        .filter(|a| a.activity == "proof_request" && a.center == "master00")
        .collect();
    requests.sort_by(|a, b| a.trigger.total_cmp(&b.trigger));
    assert!(requests.len() >= 2, "repeat mode produced {} requests", requests.len());
    for pair in requests.windows(2) {
        assert!(
            pair[1].trigger > pair[0].completion,
            "next request comes only after a think-time pause"
        );
    }
}

#[test]
fn proof_reruns_are_deterministic() {
    let run = || {
        let cfg = proof_config(&[("proof.repeat_requests", "true")]);
        let result = run_scenario(cfg).expect("run succeeds");
        (
            result.report.events_processed,
            result.stats.proof_local_hits,
            gridsim_core::harness::metrics::activities_csv(&result.metrics.activities),
        )
    };
    assert_eq!(run(), run());
}
