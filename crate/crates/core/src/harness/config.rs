//! Scenario configuration: schema, defaults, validation, and overrides.
//!
//! Configs are TOML. Every default is materialized at load time and the
//! resolved document is echoed into the output directory so a run can be
//! reproduced from its artifacts alone.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError {
    /// Dotted key path (or file path for I/O and parse errors).
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.into(), message: message.into() }
}

/// Capacity either as a constant or as a (time, bits/s) schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapacitySpec {
    Constant(f64),
    Schedule(Vec<(f64, f64)>),
}

impl CapacitySpec {
    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        match self {
            CapacitySpec::Constant(bps) => vec![(0.0, *bps)],
            CapacitySpec::Schedule(points) => points.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeCfg {
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkCfg {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub rtt_ms: f64,
    pub capacity: CapacitySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteCfg {
    pub src: String,
    pub dst: String,
    pub links: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCfg {
    /// Protocol window in bytes for the RTT throughput ceiling.
    #[serde(default = "default_window_bytes")]
    pub window_bytes: f64,
    #[serde(default)]
    pub nodes: Vec<NodeCfg>,
    #[serde(default)]
    pub links: Vec<LinkCfg>,
    #[serde(default)]
    pub routes: Vec<RouteCfg>,
}

impl Default for NetworkCfg {
    fn default() -> Self {
        NetworkCfg {
            window_bytes: default_window_bytes(),
            nodes: Vec::new(),
            links: Vec::new(),
            routes: Vec::new(),
        }
    }
}

fn default_window_bytes() -> f64 {
    8e6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterCfg {
    pub id: String,
    #[serde(default = "default_cpus")]
    pub cpus: u32,
    #[serde(default = "default_cpu_ops")]
    pub cpu_ops: f64,
    #[serde(default = "default_disk_bytes")]
    pub disk_bytes: u64,
    #[serde(default = "default_service_time")]
    pub service_time: f64,
    #[serde(default = "default_parallelism")]
    pub parallelism: u32,
    /// Tape capacity; omit for unbounded.
    #[serde(default)]
    pub mass_bytes: Option<u64>,
    #[serde(default = "default_mount_latency")]
    pub mount_latency: f64,
    /// Scheduler export threshold.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_cpus() -> u32 {
    100
}
fn default_cpu_ops() -> f64 {
    1e9
}
fn default_disk_bytes() -> u64 {
    1_000_000_000_000
}
fn default_service_time() -> f64 {
    0.5
}
fn default_parallelism() -> u32 {
    1
}
fn default_mount_latency() -> f64 {
    1.0
}
fn default_threshold() -> f64 {
    0.8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentsCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// relay center -> downstream centers.
    #[serde(default)]
    pub relays: BTreeMap<String, Vec<String>>,
}

impl Default for AgentsCfg {
    fn default() -> Self {
        AgentsCfg { enabled: true, relays: BTreeMap::new() }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawReplicationCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Center recording the detector data.
    #[serde(default = "default_raw_source")]
    pub source: String,
    /// Bytes per second of recorded detector data.
    #[serde(default = "default_recording_rate")]
    pub recording_rate: f64,
    #[serde(default = "default_raw_size")]
    pub file_size_mean: f64,
    /// Relative standard deviation of file sizes.
    #[serde(default = "default_size_sd")]
    pub file_size_sd: f64,
    /// Round-robin destination order.
    pub destinations: Vec<String>,
}

fn default_raw_source() -> String {
    "T0".to_string()
}
fn default_recording_rate() -> f64 {
    2e8
}
fn default_raw_size() -> f64 {
    2e9
}
fn default_size_sd() -> f64 {
    0.10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductionCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_dst_ratio")]
    pub dst_ratio: f64,
    #[serde(default = "default_size_sd")]
    pub dst_sd: f64,
    #[serde(default = "default_cpu_work_per_raw")]
    pub cpu_work_per_raw: f64,
}

fn default_dst_ratio() -> f64 {
    0.1
}
fn default_cpu_work_per_raw() -> f64 {
    1.2e12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproductionCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// When each center starts reprocessing its locally held RAW files.
    pub start_time: f64,
    #[serde(default = "default_cpu_work_per_raw")]
    pub cpu_work_per_raw: f64,
    /// Reprocessing jobs submitted concurrently per center.
    #[serde(default = "default_repro_concurrent")]
    pub max_concurrent: u32,
    /// Whether the new DSTs also go back to the top-level center.
    #[serde(default)]
    pub include_origin: bool,
}

fn default_repro_concurrent() -> u32 {
    60
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Centers running the daily gather.
    pub centers: Vec<String>,
    /// Local trigger time as "HH:MM".
    #[serde(default = "default_local_start")]
    pub local_start: String,
    #[serde(default = "default_window_hours")]
    pub window_hours: f64,
    /// Concurrent fetches per activity run.
    #[serde(default = "default_max_parallel")]
    pub max_parallel: u32,
    /// Center -> UTC offset in hours.
    #[serde(default)]
    pub utc_offsets: BTreeMap<String, f64>,
}

fn default_local_start() -> String {
    "09:00".to_string()
}
fn default_window_hours() -> f64 {
    12.0
}
fn default_max_parallel() -> u32 {
    32
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ActivitiesCfg {
    #[serde(default)]
    pub raw_replication: Option<RawReplicationCfg>,
    #[serde(default)]
    pub production: Option<ProductionCfg>,
    #[serde(default)]
    pub reproduction: Option<ReproductionCfg>,
    #[serde(default)]
    pub analysis: Option<AnalysisCfg>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProofCfg {
    #[serde(default = "default_masters")]
    pub masters: u32,
    #[serde(default = "default_slave_stations")]
    pub slave_stations: u32,
    #[serde(default = "default_data_servers")]
    pub data_servers: u32,
    #[serde(default = "default_slaves_per_master")]
    pub slaves_per_master: u32,
    /// Probability a packet's file is already on the station's local disk.
    #[serde(default = "default_p_local")]
    pub p_local: f64,
    /// Events per work packet.
    #[serde(default = "default_packet_events")]
    pub packet_events: u32,
    /// Dataset files per request.
    #[serde(default = "default_dataset_files")]
    pub dataset_files: u32,
    /// Work packets per dataset file.
    #[serde(default = "default_packets_per_file")]
    pub packets_per_file: u32,
    /// Bytes moved when a dataset file is fetched from a server.
    #[serde(default = "default_file_bytes")]
    pub file_bytes: u64,
    #[serde(default = "default_master_handle_time")]
    pub master_handle_time: f64,
    #[serde(default = "default_server_service_time")]
    pub server_service_time: f64,
    /// Total CPU operations to process one request.
    #[serde(default = "default_request_cpu_work")]
    pub request_cpu_work: f64,
    #[serde(default)]
    pub repeat_requests: bool,
    /// Mean exponential pause between repeated client requests.
    #[serde(default = "default_think_time")]
    pub think_time_mean: f64,
    #[serde(default = "default_lan_bandwidth")]
    pub lan_bandwidth: f64,
    #[serde(default = "default_cpu_ops")]
    pub station_cpu_ops: f64,
    #[serde(default = "default_station_cores")]
    pub station_cores: u32,
    #[serde(default = "default_server_disk")]
    pub server_disk_bytes: u64,
}

fn default_masters() -> u32 {
    20
}
fn default_slave_stations() -> u32 {
    500
}
fn default_data_servers() -> u32 {
    4
}
fn default_slaves_per_master() -> u32 {
    25
}
fn default_p_local() -> f64 {
    0.5
}
fn default_packet_events() -> u32 {
    1000
}
fn default_dataset_files() -> u32 {
    100
}
fn default_packets_per_file() -> u32 {
    1
}
fn default_file_bytes() -> u64 {
    100_000_000
}
fn default_master_handle_time() -> f64 {
    0.05
}
fn default_server_service_time() -> f64 {
    0.5
}
fn default_request_cpu_work() -> f64 {
    // "A couple of hours on a single CPU": 2.5 h at 1e9 ops/s.
    2.5 * 3600.0 * 1e9
}
fn default_think_time() -> f64 {
    300.0
}
fn default_lan_bandwidth() -> f64 {
    5e8
}
fn default_station_cores() -> u32 {
    1
}
fn default_server_disk() -> u64 {
    100_000_000_000_000
}

/// Root scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioCfg {
    /// "t0t1" or "proof".
    pub scenario: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub duration: f64,
    #[serde(default = "default_metrics_interval")]
    pub metrics_interval: f64,
    #[serde(default)]
    pub network: NetworkCfg,
    #[serde(default)]
    pub centers: Vec<CenterCfg>,
    #[serde(default)]
    pub agents: AgentsCfg,
    #[serde(default)]
    pub activities: ActivitiesCfg,
    #[serde(default)]
    pub proof: Option<ProofCfg>,
}

fn default_seed() -> u64 {
    1
}
fn default_metrics_interval() -> f64 {
    300.0
}

impl ScenarioCfg {
    pub fn from_file(path: &Path) -> Result<ScenarioCfg, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<ScenarioCfg, ConfigError> {
        let value: toml::Value =
            text.parse().map_err(|e: toml::de::Error| err(origin, e.to_string()))?;
        Self::from_value(value, origin)
    }

    pub fn from_value(value: toml::Value, origin: &str) -> Result<ScenarioCfg, ConfigError> {
        let cfg: ScenarioCfg =
            value.try_into().map_err(|e: toml::de::Error| err(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize the fully resolved document (all defaults materialized).
    pub fn to_resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn center_names(&self) -> Vec<&str> {
        self.centers.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.scenario.as_str() {
            "t0t1" => self.validate_t0t1(),
            "proof" => self.validate_proof(),
            other => Err(err("scenario", format!("unknown scenario kind '{other}'"))),
        }?;
        if self.duration <= 0.0 {
            return Err(err("duration", "must be positive"));
        }
        if self.metrics_interval <= 0.0 {
            return Err(err("metrics_interval", "must be positive"));
        }
        Ok(())
    }

    fn validate_t0t1(&self) -> Result<(), ConfigError> {
        if self.centers.is_empty() {
            return Err(err("centers", "t0t1 scenario requires centers"));
        }
        let centers = self.center_names();
        let mut node_names: Vec<&str> = self.network.nodes.iter().map(|n| n.id.as_str()).collect();
        node_names.sort_unstable();
        if let Some(dup) = node_names.windows(2).find(|w| w[0] == w[1]) {
            return Err(err("network.nodes", format!("duplicate node '{}'", dup[0])));
        }
        for center in &centers {
            if !node_names.contains(center) {
                return Err(err(
                    format!("centers.{center}"),
                    "center has no matching network node",
                ));
            }
        }
        for (i, link) in self.network.links.iter().enumerate() {
            let path = format!("network.links[{}]", link.id);
            if self.network.links.iter().filter(|l| l.id == link.id).count() > 1 {
                return Err(err(path, "duplicate link id"));
            }
            for endpoint in [&link.from, &link.to] {
                if !node_names.contains(&endpoint.as_str()) {
                    return Err(err(
                        format!("network.links[{}].from/to", link.id),
                        format!("unknown node '{endpoint}'"),
                    ));
                }
            }
            if link.rtt_ms < 0.0 {
                return Err(err(format!("network.links[{}].rtt_ms", link.id), "must be >= 0"));
            }
            let schedule = link.capacity.breakpoints();
            if schedule.is_empty() || schedule[0].0 != 0.0 {
                return Err(err(
                    format!("network.links[{}].capacity", link.id),
                    "schedule must start at t=0",
                ));
            }
            for w in schedule.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(err(
                        format!("network.links[{}].capacity", link.id),
                        "breakpoints must strictly increase",
                    ));
                }
            }
            for &(at, bps) in &schedule {
                if bps <= 0.0 {
                    return Err(err(
                        format!("network.links[{}].capacity", link.id),
                        format!("non-positive capacity {bps} at t={at}"),
                    ));
                }
            }
            let _ = i;
        }
        for center in &self.centers {
            let path = format!("centers.{}", center.id);
            if center.cpus == 0 {
                return Err(err(format!("{path}.cpus"), "must be positive"));
            }
            if center.cpu_ops <= 0.0 {
                return Err(err(format!("{path}.cpu_ops"), "must be positive"));
            }
            if center.service_time < 0.0 {
                return Err(err(format!("{path}.service_time"), "must be >= 0"));
            }
            if !(0.0..=f64::INFINITY).contains(&center.threshold) {
                return Err(err(format!("{path}.threshold"), "must be >= 0"));
            }
        }
        // Relay plan references and cycles.
        for (relay, downstream) in &self.agents.relays {
            if !centers.contains(&relay.as_str()) {
                return Err(err(format!("agents.relays.{relay}"), "unknown center"));
            }
            for d in downstream {
                if !centers.contains(&d.as_str()) {
                    return Err(err(
                        format!("agents.relays.{relay}"),
                        format!("unknown downstream center '{d}'"),
                    ));
                }
            }
        }
        {
            use crate::model::CenterId;
            use crate::scheduling::AgentPlan;
            let mut plan = AgentPlan::new();
            for (relay, downstream) in &self.agents.relays {
                let rid = CenterId(centers.iter().position(|c| c == relay).unwrap() as u32);
                let dset = downstream
                    .iter()
                    .map(|d| CenterId(centers.iter().position(|c| c == d).unwrap() as u32))
                    .collect();
                plan.add_relay(rid, dset);
            }
            plan.validate(|c| centers[c.0 as usize].to_string())
                .map_err(|e| err("agents.relays", e.to_string()))?;
        }
        // Connectivity: every pair of centers a scenario could move data
        // between must resolve to a path.
        {
            use crate::network::{LinkSpec, RouteSpec, Topology};
            let nodes: Vec<String> = self.network.nodes.iter().map(|n| n.id.clone()).collect();
            let links: Vec<LinkSpec> = self
                .network
                .links
                .iter()
                .map(|l| LinkSpec {
                    name: l.id.clone(),
                    a: l.from.clone(),
                    b: l.to.clone(),
                    rtt: l.rtt_ms / 1000.0,
                    schedule: l.capacity.breakpoints(),
                })
                .collect();
            let routes: Vec<RouteSpec> = self
                .network
                .routes
                .iter()
                .map(|r| RouteSpec { src: r.src.clone(), dst: r.dst.clone(), links: r.links.clone() })
                .collect();
            let mut topology = Topology::build(&nodes, &links, &routes)
                .map_err(|e| err("network", e.to_string()))?;
            for a in &centers {
                for b in &centers {
                    if a == b {
                        continue;
                    }
                    let src = topology.node_id(a).expect("checked above");
                    let dst = topology.node_id(b).expect("checked above");
                    if topology.route(src, dst).is_none() {
                        return Err(err(
                            "network",
                            format!("no path between centers '{a}' and '{b}'"),
                        ));
                    }
                }
            }
        }
        if let Some(raw) = self.activities.raw_replication.as_ref().filter(|r| r.enabled) {
            if raw.destinations.is_empty() {
                return Err(err("activities.raw_replication.destinations", "must be non-empty"));
            }
            if !centers.contains(&raw.source.as_str()) {
                return Err(err(
                    "activities.raw_replication.source",
                    format!("unknown center '{}'", raw.source),
                ));
            }
            for d in &raw.destinations {
                if !centers.contains(&d.as_str()) {
                    return Err(err(
                        "activities.raw_replication.destinations",
                        format!("unknown center '{d}'"),
                    ));
                }
                if d == &raw.source {
                    return Err(err(
                        "activities.raw_replication.destinations",
                        "destinations must not include the source",
                    ));
                }
            }
            if raw.recording_rate <= 0.0 {
                return Err(err("activities.raw_replication.recording_rate", "must be positive"));
            }
            if raw.file_size_mean <= 0.0 {
                return Err(err("activities.raw_replication.file_size_mean", "must be positive"));
            }
            if raw.file_size_sd < 0.0 {
                return Err(err("activities.raw_replication.file_size_sd", "must be >= 0"));
            }
        }
        if let Some(production) = self.activities.production.as_ref().filter(|p| p.enabled) {
            if production.dst_ratio <= 0.0 || production.dst_ratio > 1.0 {
                return Err(err("activities.production.dst_ratio", "must be in (0, 1]"));
            }
            if production.cpu_work_per_raw <= 0.0 {
                return Err(err("activities.production.cpu_work_per_raw", "must be positive"));
            }
        }
        if let Some(repro) = self.activities.reproduction.as_ref().filter(|r| r.enabled) {
            if repro.start_time < 0.0 {
                return Err(err("activities.reproduction.start_time", "must be >= 0"));
            }
            if repro.max_concurrent == 0 {
                return Err(err("activities.reproduction.max_concurrent", "must be positive"));
            }
        }
        if let Some(analysis) = self.activities.analysis.as_ref().filter(|a| a.enabled) {
            for c in &analysis.centers {
                if !centers.contains(&c.as_str()) {
                    return Err(err("activities.analysis.centers", format!("unknown center '{c}'")));
                }
            }
            parse_local_start(&analysis.local_start)
                .map_err(|m| err("activities.analysis.local_start", m))?;
            if analysis.window_hours <= 0.0 {
                return Err(err("activities.analysis.window_hours", "must be positive"));
            }
            if analysis.max_parallel == 0 {
                return Err(err("activities.analysis.max_parallel", "must be positive"));
            }
            for c in analysis.utc_offsets.keys() {
                if !centers.contains(&c.as_str()) {
                    return Err(err(
                        "activities.analysis.utc_offsets",
                        format!("unknown center '{c}'"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_proof(&self) -> Result<(), ConfigError> {
        let proof = self
            .proof
            .as_ref()
            .ok_or_else(|| err("proof", "proof scenario requires a [proof] section"))?;
        if proof.masters == 0 {
            return Err(err("proof.masters", "must be positive"));
        }
        if proof.slave_stations == 0 {
            return Err(err("proof.slave_stations", "must be positive"));
        }
        if proof.data_servers == 0 {
            return Err(err("proof.data_servers", "must be positive"));
        }
        if proof.slaves_per_master == 0 {
            return Err(err("proof.slaves_per_master", "must be positive"));
        }
        if (proof.slaves_per_master as u64) * (proof.masters as u64)
            < proof.slave_stations as u64
        {
            return Err(err(
                "proof.slaves_per_master",
                "masters x slaves_per_master must cover every slave station",
            ));
        }
        if !(0.0..=1.0).contains(&proof.p_local) {
            return Err(err("proof.p_local", "must be in [0, 1]"));
        }
        if proof.packet_events == 0 || proof.dataset_files == 0 || proof.packets_per_file == 0 {
            return Err(err("proof", "packet_events, dataset_files, packets_per_file must be positive"));
        }
        if proof.lan_bandwidth <= 0.0 {
            return Err(err("proof.lan_bandwidth", "must be positive"));
        }
        if proof.request_cpu_work <= 0.0 {
            return Err(err("proof.request_cpu_work", "must be positive"));
        }
        if proof.think_time_mean <= 0.0 {
            return Err(err("proof.think_time_mean", "must be positive"));
        }
        Ok(())
    }
}

/// Parse "HH:MM" into seconds after local midnight.
pub fn parse_local_start(text: &str) -> Result<f64, String> {
    let (h, m) = text
        .split_once(':')
        .ok_or_else(|| format!("expected HH:MM, got '{text}'"))?;
    let hours: u32 = h.parse().map_err(|_| format!("bad hour in '{text}'"))?;
    let minutes: u32 = m.parse().map_err(|_| format!("bad minute in '{text}'"))?;
    if hours >= 24 || minutes >= 60 {
        return Err(format!("out-of-range time '{text}'"));
    }
    Ok(hours as f64 * 3600.0 + minutes as f64 * 60.0)
}

// ---- overrides ---------------------------------------------------------------

/// Apply one `path=value` override onto a raw TOML tree. Path segments are
/// dot-separated; `segment[name]` selects the element of an array of tables
/// whose `id` field equals `name`.
pub fn apply_override(root: &mut toml::Value, path: &str, raw_value: &str) -> Result<(), ConfigError> {
    let value = parse_override_value(raw_value)
        .map_err(|m| err(path.to_string(), m))?;
    let segments = parse_path(path).map_err(|m| err(path.to_string(), m))?;
    let mut cursor = root;
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        match segment {
            PathSegment::Key(key) => {
                let table = cursor
                    .as_table_mut()
                    .ok_or_else(|| err(path.to_string(), "path traverses a non-table"))?;
                if last {
                    table.insert(key.clone(), value);
                    return Ok(());
                }
                cursor = table
                    .entry(key.clone())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
            PathSegment::Select { key, id } => {
                let table = cursor
                    .as_table_mut()
                    .ok_or_else(|| err(path.to_string(), "path traverses a non-table"))?;
                let array = table
                    .get_mut(key)
                    .and_then(|v| v.as_array_mut())
                    .ok_or_else(|| err(path.to_string(), format!("'{key}' is not an array")))?;
                let element = array
                    .iter_mut()
                    .find(|e| {
                        e.get("id").and_then(|v| v.as_str()).is_some_and(|s| s == id)
                    })
                    .ok_or_else(|| {
                        err(path.to_string(), format!("no element of '{key}' with id '{id}'"))
                    })?;
                if last {
                    return Err(err(path.to_string(), "selector cannot be the final segment"));
                }
                cursor = element;
            }
        }
    }
    Err(err(path.to_string(), "empty override path"))
}

#[derive(Debug)]
enum PathSegment {
    Key(String),
    Select { key: String, id: String },
}

fn parse_path(path: &str) -> Result<Vec<PathSegment>, String> {
    let mut segments = Vec::new();
    for part in path.split('.') {
        if part.is_empty() {
            return Err("empty path segment".to_string());
        }
        if let Some(open) = part.find('[') {
            if !part.ends_with(']') {
                return Err(format!("malformed selector in '{part}'"));
            }
            let key = &part[..open];
            let id = &part[open + 1..part.len() - 1];
            if key.is_empty() || id.is_empty() {
                return Err(format!("malformed selector in '{part}'"));
            }
            segments.push(PathSegment::Select { key: key.to_string(), id: id.to_string() });
        } else {
            segments.push(PathSegment::Key(part.to_string()));
        }
    }
    Ok(segments)
}

fn parse_override_value(raw: &str) -> Result<toml::Value, String> {
    let doc = format!("v = {raw}");
    if let Ok(value) = doc.parse::<toml::Value>() {
        if let Some(v) = value.get("v") {
            return Ok(v.clone());
        }
    }
    // Fall back to a quoted string.
    let doc = format!("v = {:?}", raw);
    let value = doc.parse::<toml::Value>().map_err(|e| e.to_string())?;
    Ok(value.get("v").cloned().ok_or("unparseable value")?)
}
