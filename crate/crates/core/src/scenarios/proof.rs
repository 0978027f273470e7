//! Master/slave analysis cluster with pull-based work packets.
//!
//! Clients submit dataset-processing requests to master stations. Each slave
//! process loops: ask its master for a packet, resolve the packet's file
//! (local disk with some probability, otherwise fetched from a data server
//! through a FIFO service queue and the LAN), burn CPU on its station, and
//! return the partial result. Masters handle queued messages one at a time.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

use crate::datalayer::Location;
use crate::engine::{Claim, ProcessId, SimTime};
use crate::harness::config::ProofCfg;
use crate::model::{FileClass, FileId, NodeId, ServerId};
use crate::network::{LinkSpec, Topology};
use crate::scenarios::world::{Core, RunError};
use crate::scenarios::{sample_exponential, ClaimOwner, Event, ServicePurpose, TransferPurpose};

#[derive(Debug, Clone)]
pub enum MasterMsg {
    /// A client request arrived at the given time.
    Client { at: SimTime },
    /// A slave asks for its next work packet.
    Work { slave: usize },
    /// A slave returns a processed packet.
    Result { slave: usize },
}

#[derive(Debug)]
pub struct Master {
    pub name: String,
    pub slaves: Vec<usize>,
    pub queue: VecDeque<MasterMsg>,
    pub busy: bool,
    pub current_request: Option<usize>,
}

#[derive(Debug)]
pub struct Station {
    pub name: String,
    pub node: NodeId,
    pub resource: crate::engine::ResourceId,
    /// Dataset files currently on this station's local disk.
    pub holdings: BTreeSet<FileId>,
}

#[derive(Debug)]
pub struct Slave {
    pub station: usize,
    pub master: usize,
    pub process: ProcessId,
    pub packet: Option<Packet>,
}

#[derive(Debug, Clone, Copy)]
pub struct Packet {
    pub request: usize,
    pub file: FileId,
}

#[derive(Debug)]
pub struct RequestState {
    pub master: usize,
    pub arrived: SimTime,
    pub completed: Option<SimTime>,
    pub packets_total: u64,
    pub packets_done: u64,
    pub unassigned: VecDeque<FileId>,
    pub bytes_fetched: u64,
}

#[derive(Debug)]
pub struct ProofState {
    pub cfg: ProofCfg,
    pub masters: Vec<Master>,
    pub stations: Vec<Station>,
    pub servers: Vec<ServerId>,
    pub slaves: Vec<Slave>,
    pub requests: Vec<RequestState>,
    pub local_hits: u64,
    pub server_fetches: u64,
    file_placement_cursor: usize,
}

impl ProofState {
    /// Assemble the LAN: every station and server hangs off one switch.
    pub fn build_topology(cfg: &ProofCfg) -> Result<Topology, RunError> {
        let mut nodes = vec!["switch".to_string()];
        let mut links = Vec::new();
        for i in 0..cfg.slave_stations {
            let name = format!("station{i:03}");
            links.push(LinkSpec {
                name: format!("lan-{name}"),
                a: name.clone(),
                b: "switch".to_string(),
                rtt: 0.0,
                schedule: vec![(0.0, cfg.lan_bandwidth)],
            });
            nodes.push(name);
        }
        for j in 0..cfg.data_servers {
            let name = format!("server{j:02}");
            links.push(LinkSpec {
                name: format!("lan-{name}"),
                a: name.clone(),
                b: "switch".to_string(),
                rtt: 0.0,
                schedule: vec![(0.0, cfg.lan_bandwidth)],
            });
            nodes.push(name);
        }
        Topology::build(&nodes, &links, &[]).map_err(RunError::from)
    }

    pub fn build(core: &mut Core, cfg: &ProofCfg, duration: f64) -> Result<ProofState, RunError> {
        let mut servers = Vec::new();
        for j in 0..cfg.data_servers {
            let name = format!("server{j:02}");
            let node = core.net.topology.node_id(&name).expect("server node");
            let center = core.data.add_site(
                &name,
                node,
                cfg.server_disk_bytes,
                cfg.server_service_time,
                1,
                None,
                0.0,
            );
            servers.push(core.data.site(center).server);
        }
        let mut stations = Vec::new();
        for i in 0..cfg.slave_stations {
            let name = format!("station{i:03}");
            let node = core.net.topology.node_id(&name).expect("station node");
            let capacity = cfg.station_cores as f64 * cfg.station_cpu_ops;
            let resource = core.kernel.add_resource(format!("cpu:{name}"), capacity);
            core.metrics.track_cpu(name.clone(), resource, capacity);
            stations.push(Station { name, node, resource, holdings: BTreeSet::new() });
        }
        let mut masters = Vec::new();
        let mut slaves = Vec::new();
        for m in 0..cfg.masters {
            let mut members = Vec::new();
            for k in 0..cfg.slaves_per_master {
                let idx = slaves.len();
                let station =
                    ((m * cfg.slaves_per_master + k) % cfg.slave_stations) as usize;
                let process = core.kernel.spawn(format!("slave-{m}-{k}"));
                core.owners.insert(process, ClaimOwner::ProofSlave(idx));
                slaves.push(Slave { station, master: m as usize, process, packet: None });
                members.push(idx);
            }
            masters.push(Master {
                name: format!("master{m:02}"),
                slaves: members,
                queue: VecDeque::new(),
                busy: false,
                current_request: None,
            });
        }
        let state = ProofState {
            cfg: cfg.clone(),
            masters,
            stations,
            servers,
            slaves,
            requests: Vec::new(),
            local_hits: 0,
            server_fetches: 0,
            file_placement_cursor: 0,
        };
        for m in 0..state.masters.len() {
            core.schedule(0.0, Event::ProofClientRequest { master: m })?;
        }
        let _ = duration;
        Ok(state)
    }
}

// ---- master message machinery ------------------------------------------------

fn enqueue_master_msg(core: &mut Core, st: &mut ProofState, master: usize, msg: MasterMsg) -> Result<(), RunError> {
    st.masters[master].queue.push_back(msg);
    arm_master(core, st, master)
}

fn arm_master(core: &mut Core, st: &mut ProofState, master: usize) -> Result<(), RunError> {
    let m = &mut st.masters[master];
    if m.busy || m.queue.is_empty() {
        return Ok(());
    }
    m.busy = true;
    let done_at = core.kernel.now() + st.cfg.master_handle_time;
    core.kernel.schedule(done_at, None, Event::ProofMasterDone { master })?;
    Ok(())
}

pub fn on_client_request(core: &mut Core, st: &mut ProofState, master: usize) -> Result<(), RunError> {
    let at = core.kernel.now();
    enqueue_master_msg(core, st, master, MasterMsg::Client { at })
}

pub fn on_master_done(core: &mut Core, st: &mut ProofState, master: usize) -> Result<(), RunError> {
    let msg = {
        let m = &mut st.masters[master];
        m.busy = false;
        m.queue.pop_front().expect("handled message exists")
    };
    match msg {
        MasterMsg::Client { at } => handle_client_request(core, st, master, at)?,
        MasterMsg::Work { slave } => handle_work_request(core, st, master, slave)?,
        MasterMsg::Result { slave } => handle_result(core, st, master, slave)?,
    }
    arm_master(core, st, master)
}

/// The master resolved a client request: materialize the dataset on the data
/// servers, split it into packets, and poke every idle slave.
fn handle_client_request(
    core: &mut Core,
    st: &mut ProofState,
    master: usize,
    arrived: SimTime,
) -> Result<(), RunError> {
    let now = core.kernel.now();
    let request = st.requests.len();
    let mut unassigned = VecDeque::new();
    for _ in 0..st.cfg.dataset_files {
        let file = core.data.create_file(FileClass::Raw, st.cfg.file_bytes, now, (0, 0));
        let server = st.servers[st.file_placement_cursor % st.servers.len()];
        st.file_placement_cursor += 1;
        core.data.store(file, server)?;
        for _ in 0..st.cfg.packets_per_file {
            unassigned.push_back(file);
        }
    }
    let packets_total = unassigned.len() as u64;
    st.requests.push(RequestState {
        master,
        arrived,
        completed: None,
        packets_total,
        packets_done: 0,
        unassigned,
        bytes_fetched: 0,
    });
    st.masters[master].current_request = Some(request);
    let idle: Vec<usize> = st.masters[master]
        .slaves
        .iter()
        .copied()
        .filter(|&s| st.slaves[s].packet.is_none())
        .collect();
    for slave in idle {
        enqueue_master_msg(core, st, master, MasterMsg::Work { slave })?;
    }
    Ok(())
}

/// Assign a packet, preferring files the slave's station already holds.
fn handle_work_request(core: &mut Core, st: &mut ProofState, master: usize, slave: usize) -> Result<(), RunError> {
    let Some(request) = st.masters[master].current_request else { return Ok(()) };
    let file = {
        let station = &st.stations[st.slaves[slave].station];
        let queue = &mut st.requests[request].unassigned;
        if queue.is_empty() {
            return Ok(()); // dataset exhausted, slave idles until the next request
        }
        match queue.iter().position(|f| station.holdings.contains(f)) {
            Some(pos) => queue.remove(pos).unwrap(),
            None => queue.pop_front().unwrap(),
        }
    };
    st.slaves[slave].packet = Some(Packet { request, file });
    resolve_packet_data(core, st, slave, file)
}

/// Local-or-fetch resolution for the packet's file.
fn resolve_packet_data(core: &mut Core, st: &mut ProofState, slave: usize, file: FileId) -> Result<(), RunError> {
    let station_idx = st.slaves[slave].station;
    if st.stations[station_idx].holdings.contains(&file) {
        st.local_hits += 1;
        return begin_compute(core, st, slave);
    }
    if core.rng.proof_locality.gen_bool(st.cfg.p_local) {
        st.stations[station_idx].holdings.insert(file);
        st.local_hits += 1;
        return begin_compute(core, st, slave);
    }
    st.server_fetches += 1;
    let server = {
        let record = core.data.file(file).ok_or(RunError::MissingFile(file))?;
        let disk = record.replicas.iter().find_map(|loc| match loc {
            Location::Disk(s) => Some(*s),
            Location::Tape(_) => None,
        });
        disk.ok_or(RunError::Corrupt("dataset file has no disk replica"))?
    };
    let ticket = core.new_ticket(ServicePurpose::Proof { slave, file });
    core.data.request_read(&mut core.kernel, server, file, ticket);
    Ok(())
}

/// Server slot served: ship the file over the LAN to the slave's station.
pub fn on_proof_served(
    core: &mut Core,
    st: &mut ProofState,
    slave: usize,
    server: ServerId,
    file: FileId,
) -> Result<(), RunError> {
    let record = core.data.file(file).ok_or(RunError::MissingFile(file))?;
    let size = record.size;
    let src = core.data.site(core.data.server(server).center).node;
    let dst = st.stations[st.slaves[slave].station].node;
    let transfer =
        core.net.start_transfer(&mut core.kernel, file, FileClass::Raw, size, src, dst)?;
    core.purposes.insert(transfer, TransferPurpose::ProofFetch { slave, file });
    Ok(())
}

pub fn on_proof_fetch_arrived(
    core: &mut Core,
    st: &mut ProofState,
    slave: usize,
    file: FileId,
    size: u64,
) -> Result<(), RunError> {
    let station = st.slaves[slave].station;
    st.stations[station].holdings.insert(file);
    if let Some(packet) = st.slaves[slave].packet {
        st.requests[packet.request].bytes_fetched += size;
    }
    begin_compute(core, st, slave)
}

fn begin_compute(core: &mut Core, st: &mut ProofState, slave: usize) -> Result<(), RunError> {
    let _packet = st.slaves[slave].packet.expect("assigned packet");
    let work = st.cfg.request_cpu_work
        / (st.cfg.dataset_files as f64 * st.cfg.packets_per_file as f64);
    let station = &st.stations[st.slaves[slave].station];
    let claim = Claim::new(st.slaves[slave].process, work, 1.0, Some(st.cfg.station_cpu_ops));
    core.kernel.resource_join(station.resource, claim)?;
    Ok(())
}

/// The station finished the packet's CPU phase: return the result and ask for
/// more work (two separate master messages).
pub fn on_compute_done(core: &mut Core, st: &mut ProofState, slave: usize) -> Result<(), RunError> {
    let master = st.slaves[slave].master;
    st.slaves[slave].packet = None;
    enqueue_master_msg(core, st, master, MasterMsg::Result { slave })?;
    enqueue_master_msg(core, st, master, MasterMsg::Work { slave })?;
    Ok(())
}

fn handle_result(core: &mut Core, st: &mut ProofState, master: usize, _slave: usize) -> Result<(), RunError> {
    let Some(request) = st.masters[master].current_request else { return Ok(()) };
    let req = &mut st.requests[request];
    req.packets_done += 1;
    if req.packets_done == req.packets_total {
        let now = core.kernel.now();
        req.completed = Some(now);
        st.masters[master].current_request = None;
        core.metrics.activities.push(crate::harness::metrics::ActivityRow {
            activity: "proof_request".to_string(),
            center: st.masters[master].name.clone(),
            trigger: req.arrived.seconds(),
            completion: now.seconds(),
            bytes_moved: req.bytes_fetched,
        });
        if st.cfg.repeat_requests {
            let think = sample_exponential(&mut core.rng.proof_think, st.cfg.think_time_mean);
            core.kernel.schedule(now + think, None, Event::ProofClientRequest { master })?;
        }
    }
    Ok(())
}
