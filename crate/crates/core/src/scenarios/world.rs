//! The simulation world: construction from a validated config, the event
//! dispatch loop, and end-of-run audits.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::datalayer::{DataError, DataLayer};
use crate::engine::{
    CompletionOutcome, EngineError, Kernel, ProcessId, SimTime, SimulationReport,
};
use crate::harness::config::ScenarioCfg;
use crate::harness::metrics::Metrics;
use crate::model::{CenterId, FileId, JobId, TransferId};
use crate::network::{
    LinkSpec, Network, NetworkError, RouteSpec, Topology, TopologyError,
};
use crate::scheduling::{AgentPlan, Scheduler, SchedulingError};
use crate::scenarios::{proof, t0t1, ClaimOwner, Event, RngStreams, ServicePurpose, TransferPurpose};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Scheduling(#[from] SchedulingError),
    #[error("unknown job {0}")]
    MissingJob(JobId),
    #[error("unknown file {0}")]
    MissingFile(FileId),
    #[error("transfer {0} completed without a registered purpose")]
    UnknownTransferPurpose(TransferId),
    #[error("service ticket {0} completed without a registered purpose")]
    UnknownTicket(u64),
    #[error("internal inconsistency: {0}")]
    Corrupt(&'static str),
}

/// Mutable simulation state shared across all scenario handlers.
pub struct Core {
    pub kernel: Kernel<Event>,
    pub net: Network,
    pub data: DataLayer,
    pub sched: Scheduler,
    pub metrics: Metrics,
    pub rng: RngStreams,
    pub plan: AgentPlan,
    pub purposes: BTreeMap<TransferId, TransferPurpose>,
    pub tickets: BTreeMap<u64, ServicePurpose>,
    pub owners: BTreeMap<ProcessId, ClaimOwner>,
    next_ticket: u64,
    pub duration: f64,
    /// Per-link bits attributed to completed transfers (consistency audit).
    pub completed_bits_per_link: Vec<f64>,
    pub byte_violations: Vec<String>,
}

impl Core {
    pub fn new_ticket(&mut self, purpose: ServicePurpose) -> u64 {
        let ticket = self.next_ticket;
        self.next_ticket += 1;
        self.tickets.insert(ticket, purpose);
        ticket
    }

    pub fn schedule(&mut self, at: f64, event: Event) -> Result<(), RunError> {
        self.kernel.schedule(SimTime::new(at), None, event)?;
        Ok(())
    }
}

/// A fully constructed simulation ready to run.
pub struct World {
    pub core: Core,
    pub t0t1: Option<t0t1::T0T1State>,
    pub proof: Option<proof::ProofState>,
    pub cfg: ScenarioCfg,
}

/// Scenario-level counters surfaced for tests and diagnostics.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub raw_files_created: u64,
    pub proof_local_hits: u64,
    pub proof_server_fetches: u64,
    pub proof_requests_completed: u64,
    pub stale_transfer_drops: u64,
    pub migrations: u64,
    pub tape_mounts: u64,
}

/// Everything a finished run hands back to the harness.
pub struct RunOutcome {
    pub report: SimulationReport,
    pub audit_violations: Vec<String>,
    pub stats: RunStats,
}

impl World {
    pub fn build(cfg: ScenarioCfg) -> Result<World, RunError> {
        let topology = match cfg.scenario.as_str() {
            "proof" => proof::ProofState::build_topology(cfg.proof.as_ref().expect("validated"))?,
            _ => {
                let nodes: Vec<String> = cfg.network.nodes.iter().map(|n| n.id.clone()).collect();
                let links: Vec<LinkSpec> = cfg
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
                let routes: Vec<RouteSpec> = cfg
                    .network
                    .routes
                    .iter()
                    .map(|r| RouteSpec { src: r.src.clone(), dst: r.dst.clone(), links: r.links.clone() })
                    .collect();
                Topology::build(&nodes, &links, &routes)?
            }
        };
        let net = Network::new(topology, cfg.network.window_bytes);
        let mut metrics = Metrics::new(cfg.metrics_interval);
        metrics.init_links(&net);

        let mut core = Core {
            kernel: Kernel::new(),
            completed_bits_per_link: vec![0.0; net.topology.links.len()],
            net,
            data: DataLayer::default(),
            sched: Scheduler::default(),
            metrics,
            rng: RngStreams::new(cfg.seed),
            plan: AgentPlan::new(),
            purposes: BTreeMap::new(),
            tickets: BTreeMap::new(),
            owners: BTreeMap::new(),
            next_ticket: 0,
            duration: cfg.duration,
            byte_violations: Vec::new(),
        };

        let mut t0t1_state = None;
        let mut proof_state = None;
        match cfg.scenario.as_str() {
            "proof" => {
                let proof_cfg = cfg.proof.as_ref().expect("validated");
                proof_state = Some(proof::ProofState::build(&mut core, proof_cfg, cfg.duration)?);
            }
            _ => {
                for center in &cfg.centers {
                    let node = core
                        .net
                        .topology
                        .node_id(&center.id)
                        .expect("validated center node");
                    let cid = core.data.add_site(
                        &center.id,
                        node,
                        center.disk_bytes,
                        center.service_time,
                        center.parallelism,
                        center.mass_bytes,
                        center.mount_latency,
                    );
                    let farm = core.sched.add_farm(
                        &mut core.kernel,
                        cid,
                        &center.id,
                        center.cpus,
                        center.cpu_ops,
                        center.threshold,
                    );
                    let (resource, capacity) = (farm.resource, farm.capacity());
                    core.metrics.track_cpu(center.id.clone(), resource, capacity);
                }
                if cfg.agents.enabled {
                    for (relay, downstream) in &cfg.agents.relays {
                        let rid = core.data.site_by_name(relay).expect("validated").center;
                        let dset = downstream
                            .iter()
                            .map(|d| core.data.site_by_name(d).expect("validated").center)
                            .collect::<std::collections::BTreeSet<CenterId>>();
                        core.plan.add_relay(rid, dset);
                    }
                }
                t0t1_state = Some(t0t1::T0T1State::build(&mut core, &cfg)?);
            }
        }

        // Capacity schedule breakpoints become interrupt events.
        for (at, link, bps) in core.net.capacity_breakpoints() {
            if at <= cfg.duration {
                core.schedule(at, Event::LinkCapacity { link, bps })?;
            }
        }
        // Metrics windows; the chain re-arms itself until the horizon.
        if cfg.metrics_interval < cfg.duration {
            core.schedule(cfg.metrics_interval, Event::MetricsTick)?;
        }

        Ok(World { core, t0t1: t0t1_state, proof: proof_state, cfg })
    }

    pub fn run(&mut self) -> Result<RunOutcome, RunError> {
        let horizon = SimTime::new(self.cfg.duration);
        loop {
            let step = self.core.kernel.next_before(horizon)?;
            match step {
                crate::engine::Step::Event(ev) => self.dispatch(ev)?,
                crate::engine::Step::Done => break,
            }
        }
        self.finalize()
    }

    fn dispatch(&mut self, ev: crate::engine::Scheduled<Event>) -> Result<(), RunError> {
        match ev.payload {
            Event::ResourceDone(completion) => {
                match self.core.kernel.handle_completion(completion)? {
                    CompletionOutcome::Stale => {}
                    CompletionOutcome::Completed { owner, .. } => {
                        let claim_owner = self.core.owners.get(&owner).copied();
                        match claim_owner {
                            Some(ClaimOwner::Job(job)) => {
                                let st = self.t0t1.as_mut().expect("job implies t0t1");
                                t0t1::on_job_finished(&mut self.core, st, job)?;
                            }
                            Some(ClaimOwner::ProofSlave(slave)) => {
                                let st = self.proof.as_mut().expect("slave implies proof");
                                proof::on_compute_done(&mut self.core, st, slave)?;
                            }
                            None => return Err(RunError::Corrupt("claim without registered owner")),
                        }
                    }
                }
            }
            Event::TransferDone(completion) => {
                let done = self.core.net.handle_completion(&mut self.core.kernel, completion)?;
                let Some(done) = done else { return Ok(()) };
                // Byte conservation and per-link attribution for the audits.
                let size_bits = done.size_bytes as f64 * 8.0;
                if (done.served_bits - size_bits).abs() > 1e-6 * size_bits.max(1.0) {
                    self.core.byte_violations.push(format!(
                        "transfer {} served {} bits for a {}-bit file",
                        done.id, done.served_bits, size_bits
                    ));
                }
                for link in &done.path {
                    self.core.completed_bits_per_link[link.0 as usize] += done.served_bits;
                }
                self.core.metrics.record_transfer(&self.core.net, &done);
                let purpose = self
                    .core
                    .purposes
                    .remove(&done.id)
                    .ok_or(RunError::UnknownTransferPurpose(done.id))?;
                match purpose {
                    TransferPurpose::RawReplica { dest } => {
                        let st = self.t0t1.as_mut().expect("t0t1 transfer");
                        t0t1::on_raw_delivered(&mut self.core, st, done.file, dest)?;
                    }
                    TransferPurpose::FanoutCopy { group, node } => {
                        let st = self.t0t1.as_mut().expect("t0t1 transfer");
                        t0t1::on_fanout_copy_arrived(&mut self.core, st, group, node)?;
                    }
                    TransferPurpose::Staging { job } => {
                        t0t1::note_input_staged(&mut self.core, job)?;
                    }
                    TransferPurpose::AnalysisFetch { run } => {
                        let st = self.t0t1.as_mut().expect("t0t1 transfer");
                        t0t1::on_analysis_fetch_arrived(&mut self.core, st, run, done.size_bytes)?;
                    }
                    TransferPurpose::ProofFetch { slave, file } => {
                        let st = self.proof.as_mut().expect("proof transfer");
                        proof::on_proof_fetch_arrived(&mut self.core, st, slave, file, done.size_bytes)?;
                    }
                }
            }
            Event::Served(done) => {
                self.core.data.complete_service(&mut self.core.kernel, &done)?;
                let purpose = self
                    .core
                    .tickets
                    .remove(&done.ticket)
                    .ok_or(RunError::UnknownTicket(done.ticket))?;
                match purpose {
                    ServicePurpose::Staging { job } => {
                        t0t1::on_staging_served(&mut self.core, job, done.server, done.file)?;
                    }
                    ServicePurpose::Analysis { run } => {
                        let st = self.t0t1.as_mut().expect("t0t1 service");
                        t0t1::on_analysis_served(&mut self.core, st, run, done.server, done.file)?;
                    }
                    ServicePurpose::Proof { slave, file } => {
                        let st = self.proof.as_mut().expect("proof service");
                        proof::on_proof_served(&mut self.core, st, slave, done.server, file)?;
                    }
                }
            }
            Event::LinkCapacity { link, bps } => {
                self.core.net.capacity_change(&mut self.core.kernel, link, bps);
            }
            Event::MetricsTick => {
                let now = self.core.kernel.now();
                self.core.net.advance(now);
                for rid in self.core.metrics.tracked_resources() {
                    self.core.kernel.resource_update(rid, now);
                }
                self.core.metrics.flush_window(&self.core.kernel, &self.core.net, now.seconds());
                let next = now.seconds() + self.core.metrics.interval;
                if next < self.cfg.duration {
                    self.core.schedule(next, Event::MetricsTick)?;
                }
            }
            Event::RawFileTick => {
                let st = self.t0t1.as_mut().expect("t0t1 event");
                t0t1::on_raw_tick(&mut self.core, st)?;
            }
            Event::ReproStart => {
                let st = self.t0t1.as_mut().expect("t0t1 event");
                t0t1::on_repro_start(&mut self.core, st)?;
            }
            Event::AnalysisTrigger { run } => {
                let st = self.t0t1.as_mut().expect("t0t1 event");
                t0t1::on_analysis_trigger(&mut self.core, st, run)?;
            }
            Event::ProofClientRequest { master } => {
                let st = self.proof.as_mut().expect("proof event");
                proof::on_client_request(&mut self.core, st, master)?;
            }
            Event::ProofMasterDone { master } => {
                let st = self.proof.as_mut().expect("proof event");
                proof::on_master_done(&mut self.core, st, master)?;
            }
        }
        Ok(())
    }

    fn finalize(&mut self) -> Result<RunOutcome, RunError> {
        let end = SimTime::new(self.cfg.duration);
        self.core.net.advance(end);
        for rid in self.core.metrics.tracked_resources() {
            self.core.kernel.resource_update(rid, end);
        }
        self.core.metrics.flush_window(&self.core.kernel, &self.core.net, self.cfg.duration);

        let mut violations = Vec::new();
        violations.extend(self.core.byte_violations.iter().cloned());
        violations.extend(self.core.data.audit());

        // Link-integral consistency: per-link served bits must equal the bits
        // attributed to completed plus still-active transfers.
        let mut expected = self.core.completed_bits_per_link.clone();
        for transfer in self.core.net.transfers() {
            for link in &transfer.path {
                expected[link.0 as usize] += transfer.served_bits;
            }
        }
        for (i, link) in self.core.net.topology.links.iter().enumerate() {
            let diff = (link.served_bits - expected[i]).abs();
            if diff > 1e-6 * link.served_bits.max(1.0) {
                violations.push(format!(
                    "link {} integral drift: {} vs attributed {}",
                    link.name, link.served_bits, expected[i]
                ));
            }
        }

        if let Some(st) = &self.t0t1 {
            // Fan-outs with no copies still in flight must have delivered
            // their full destination set exactly once.
            let mut in_flight_groups = std::collections::BTreeSet::new();
            for purpose in self.core.purposes.values() {
                if let TransferPurpose::FanoutCopy { group, .. } = purpose {
                    in_flight_groups.insert(*group);
                }
            }
            for (group, fanout) in &st.fanouts {
                if in_flight_groups.contains(group) {
                    continue;
                }
                if fanout.delivered != fanout.expected {
                    violations.push(format!(
                        "fan-out {} of file {} delivered {:?} expected {:?}",
                        group, fanout.file, fanout.delivered, fanout.expected
                    ));
                }
            }
            // Round-robin balance of assigned RAW replicas.
            if !st.raw_assigned.is_empty() {
                let max = st.raw_assigned.values().max().copied().unwrap_or(0);
                let min = st
                    .t1s
                    .iter()
                    .map(|c| st.raw_assigned.get(c).copied().unwrap_or(0))
                    .min()
                    .unwrap_or(0);
                if max - min > 1 {
                    violations.push(format!(
                        "round-robin imbalance: assigned counts {:?}",
                        st.raw_assigned
                    ));
                }
            }
        }
        if let Some(st) = &self.proof {
            for (i, request) in st.requests.iter().enumerate() {
                if let Some(_done) = request.completed {
                    if request.packets_done != request.packets_total {
                        violations.push(format!(
                            "proof request {i} completed with {}/{} packets",
                            request.packets_done, request.packets_total
                        ));
                    }
                }
            }
        }

        let mut stats = RunStats {
            stale_transfer_drops: self.core.net.stale_drops,
            migrations: self.core.data.migrations,
            tape_mounts: self.core.data.tape_mounts,
            ..Default::default()
        };
        if let Some(st) = &self.t0t1 {
            stats.raw_files_created = st.raw_created;
        }
        if let Some(st) = &self.proof {
            stats.proof_local_hits = st.local_hits;
            stats.proof_server_fetches = st.server_fetches;
            stats.proof_requests_completed =
                st.requests.iter().filter(|r| r.completed.is_some()).count() as u64;
        }

        let mut report = self.core.kernel.report().clone();
        report.final_clock = self.cfg.duration;
        Ok(RunOutcome { report, audit_violations: violations, stats })
    }
}
