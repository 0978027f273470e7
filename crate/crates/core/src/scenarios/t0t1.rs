//! The tiered replication study: RAW recording at the source center,
//! production and reproduction of derived DST files, relay-agent fan-outs,
//! and the daily detector-analysis gather.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::datalayer::Location;
use crate::harness::config::{
    parse_local_start, AnalysisCfg, ProductionCfg, RawReplicationCfg, ScenarioCfg,
};
use crate::model::{CenterId, FileClass, FileId, JobId};
use crate::scheduling::JobKind;
use crate::scenarios::world::{Core, RunError};
use crate::scenarios::{ClaimOwner, Event, ServicePurpose, SizeDistribution, TransferPurpose};

/// One fan-out delivery in progress.
#[derive(Debug)]
pub struct FanoutState {
    pub file: FileId,
    pub source: CenterId,
    pub tree: BTreeMap<CenterId, Vec<CenterId>>,
    pub expected: BTreeSet<CenterId>,
    pub delivered: BTreeSet<CenterId>,
}

/// Paced reprocessing of each center's locally held RAW files.
#[derive(Debug)]
pub struct ReproRun {
    pub cpu_work: f64,
    pub max_concurrent: u32,
    pub include_origin: bool,
    pub queues: BTreeMap<CenterId, VecDeque<FileId>>,
    pub in_flight: BTreeMap<CenterId, u32>,
    pub job_origin: BTreeMap<JobId, CenterId>,
    pub started: bool,
}

/// One scheduled daily gather at one center.
#[derive(Debug)]
pub struct AnalysisRun {
    pub center: CenterId,
    pub trigger: f64,
    pub window: f64,
    pub max_parallel: u32,
    pub pending: VecDeque<FileId>,
    pub in_flight: u32,
    pub bytes: u64,
    pub started: bool,
    pub completed: bool,
}

#[derive(Debug)]
pub struct T0T1State {
    pub source: CenterId,
    pub t1s: Vec<CenterId>,
    pub raw: Option<RawReplicationCfg>,
    pub production: Option<ProductionCfg>,
    pub dst_ratio: f64,
    pub dst_sd: f64,
    pub repro: Option<ReproRun>,
    pub analysis: Vec<AnalysisRun>,
    pub raw_dist: SizeDistribution,
    pub next_raw_size: u64,
    pub rr_index: usize,
    pub raw_created: u64,
    pub raw_assigned: BTreeMap<CenterId, u64>,
    pub raw_delivered: BTreeMap<CenterId, u64>,
    pub fanouts: BTreeMap<u64, FanoutState>,
    pub next_fanout: u64,
    pub next_event_number: u64,
    pub events_per_raw: u64,
}

impl T0T1State {
    /// Resolve config names to center ids and schedule the opening events.
    pub fn build(core: &mut Core, cfg: &ScenarioCfg) -> Result<T0T1State, RunError> {
        let center_id = |name: &str| -> CenterId {
            core.data.site_by_name(name).expect("validated center").center
        };
        let raw = cfg.activities.raw_replication.clone().filter(|r| r.enabled);
        let production = cfg.activities.production.clone().filter(|p| p.enabled);

        let (source, t1s) = match &raw {
            Some(r) => (
                center_id(&r.source),
                r.destinations.iter().map(|d| center_id(d)).collect::<Vec<_>>(),
            ),
            None => (
                CenterId(0),
                cfg.centers.iter().skip(1).map(|c| center_id(&c.id)).collect::<Vec<_>>(),
            ),
        };

        let raw_dist = match &raw {
            Some(r) => SizeDistribution::new(r.file_size_mean, r.file_size_sd),
            None => SizeDistribution::new(2e9, 0.10),
        };

        let repro = cfg.activities.reproduction.clone().filter(|r| r.enabled).map(|r| ReproRun {
            cpu_work: r.cpu_work_per_raw,
            max_concurrent: r.max_concurrent,
            include_origin: r.include_origin,
            queues: BTreeMap::new(),
            in_flight: BTreeMap::new(),
            job_origin: BTreeMap::new(),
            started: false,
        });

        let (dst_ratio, dst_sd) = production
            .as_ref()
            .map(|p| (p.dst_ratio, p.dst_sd))
            .unwrap_or((0.1, 0.10));
        let mut state = T0T1State {
            source,
            t1s,
            raw,
            production,
            dst_ratio,
            dst_sd,
            repro,
            analysis: Vec::new(),
            raw_dist,
            next_raw_size: 0,
            rr_index: 0,
            raw_created: 0,
            raw_assigned: BTreeMap::new(),
            raw_delivered: BTreeMap::new(),
            fanouts: BTreeMap::new(),
            next_fanout: 0,
            next_event_number: 0,
            events_per_raw: 1000,
        };

        if let Some(raw_cfg) = &state.raw {
            state.next_raw_size = state.raw_dist.sample(&mut core.rng.raw_sizes);
            let first = state.next_raw_size as f64 / raw_cfg.recording_rate;
            core.schedule(first, Event::RawFileTick)?;
        }
        if state.repro.is_some() {
            let start = cfg.activities.reproduction.as_ref().unwrap().start_time;
            if start <= cfg.duration {
                core.schedule(start, Event::ReproStart)?;
            }
        }
        if let Some(analysis_cfg) = cfg.activities.analysis.clone().filter(|a| a.enabled) {
            state.schedule_analysis_runs(core, cfg, &analysis_cfg)?;
        }
        Ok(state)
    }

    fn schedule_analysis_runs(
        &mut self,
        core: &mut Core,
        cfg: &ScenarioCfg,
        analysis: &AnalysisCfg,
    ) -> Result<(), RunError> {
        let local_start = parse_local_start(&analysis.local_start).expect("validated");
        for name in &analysis.centers {
            let center = core.data.site_by_name(name).expect("validated center").center;
            let offset_h = analysis.utc_offsets.get(name).copied().unwrap_or(0.0);
            // Simulation time is UTC; the first local HH:MM maps back to
            // (local_start - offset) mod 24h.
            let first = (local_start - offset_h * 3600.0).rem_euclid(86_400.0);
            let mut trigger = first;
            while trigger <= cfg.duration {
                let run = self.analysis.len();
                self.analysis.push(AnalysisRun {
                    center,
                    trigger,
                    window: analysis.window_hours * 3600.0,
                    max_parallel: analysis.max_parallel,
                    pending: VecDeque::new(),
                    in_flight: 0,
                    bytes: 0,
                    started: false,
                    completed: false,
                });
                core.schedule(trigger, Event::AnalysisTrigger { run })?;
                trigger += 86_400.0;
            }
        }
        Ok(())
    }
}

// ---- RAW replication ----------------------------------------------------------

pub fn on_raw_tick(core: &mut Core, st: &mut T0T1State) -> Result<(), RunError> {
    let Some(raw_cfg) = st.raw.clone() else { return Ok(()) };
    let now = core.kernel.now();
    let size = st.next_raw_size;
    let first_event = st.next_event_number;
    st.next_event_number += st.events_per_raw;
    let file = core.data.create_file(
        FileClass::Raw,
        size,
        now,
        (first_event, first_event + st.events_per_raw - 1),
    );
    let source_server = core.data.site(st.source).server;
    core.data.store(file, source_server)?;
    st.raw_created += 1;

    let dest = st.t1s[st.rr_index % st.t1s.len()];
    st.rr_index += 1;
    *st.raw_assigned.entry(dest).or_insert(0) += 1;
    let src_node = core.data.site(st.source).node;
    let dst_node = core.data.site(dest).node;
    let transfer = core.net.start_transfer(
        &mut core.kernel,
        file,
        FileClass::Raw,
        size,
        src_node,
        dst_node,
    )?;
    core.purposes.insert(transfer, TransferPurpose::RawReplica { dest });

    if let Some(production) = &st.production {
        let work = production.cpu_work_per_raw;
        submit_job(core, JobKind::Production, work, vec![file], st.source)?;
    }

    st.next_raw_size = st.raw_dist.sample(&mut core.rng.raw_sizes);
    let next = now + st.next_raw_size as f64 / raw_cfg.recording_rate;
    core.kernel.schedule(next, None, Event::RawFileTick)?;
    Ok(())
}

pub fn on_raw_delivered(core: &mut Core, st: &mut T0T1State, file: FileId, dest: CenterId) -> Result<(), RunError> {
    let server = core.data.site(dest).server;
    core.data.store(file, server)?;
    *st.raw_delivered.entry(dest).or_insert(0) += 1;
    Ok(())
}

// ---- jobs ---------------------------------------------------------------------

pub fn submit_job(
    core: &mut Core,
    kind: JobKind,
    cpu_work: f64,
    inputs: Vec<FileId>,
    origin: CenterId,
) -> Result<JobId, RunError> {
    let id = core.sched.submit(&mut core.kernel, kind, cpu_work, inputs.clone(), origin);
    let process = core.sched.job(id).unwrap().process;
    core.owners.insert(process, ClaimOwner::Job(id));

    let placed = core.sched.job(id).unwrap().placed;
    let site = core.data.site(placed).clone();

    // Fail fast when any input lacks a replica anywhere.
    for &file in &inputs {
        let replicas_empty = core.data.file(file).is_none_or(|r| r.replicas.is_empty());
        if replicas_empty {
            core.sched.fail_job(&mut core.kernel, id)?;
            core.metrics.job_failures += 1;
            return Ok(id);
        }
    }

    let mut pending = 0usize;
    for &file in &inputs {
        let record = core.data.file(file).unwrap();
        if record.replicas.contains(&Location::Disk(site.server)) {
            continue; // local disk input, no staging
        }
        if record.replicas.contains(&Location::Tape(site.mass)) {
            // Local but on tape: a read through the local server stages it back.
            let ticket = core.new_ticket(ServicePurpose::Staging { job: id });
            core.data.request_read(&mut core.kernel, site.server, file, ticket);
            pending += 1;
            continue;
        }
        let remote = core.data.find_optimal(&mut core.net, file, placed)?;
        let ticket = core.new_ticket(ServicePurpose::Staging { job: id });
        core.data.request_read(&mut core.kernel, remote, file, ticket);
        pending += 1;
    }
    if pending == 0 {
        core.sched.start_cpu_phase(&mut core.kernel, id)?;
    } else {
        core.sched.expect_staged_inputs(id, pending)?;
    }
    Ok(id)
}

/// A staging read finished its service slot: local tape reads resolve on the
/// spot, remote reads start the wire transfer.
pub fn on_staging_served(
    core: &mut Core,
    job: JobId,
    server: crate::model::ServerId,
    file: FileId,
) -> Result<(), RunError> {
    let placed = core.sched.job(job).ok_or(RunError::MissingJob(job))?.placed;
    let server_center = core.data.server(server).center;
    if server_center == placed {
        note_input_staged(core, job)?;
    } else {
        let record = core.data.file(file).ok_or(RunError::MissingFile(file))?;
        let (class, size) = (record.class, record.size);
        let src = core.data.site(server_center).node;
        let dst = core.data.site(placed).node;
        let transfer = core.net.start_transfer(&mut core.kernel, file, class, size, src, dst)?;
        core.purposes.insert(transfer, TransferPurpose::Staging { job });
    }
    Ok(())
}

pub fn note_input_staged(core: &mut Core, job: JobId) -> Result<(), RunError> {
    if core.sched.input_staged(job)? {
        core.sched.start_cpu_phase(&mut core.kernel, job)?;
    }
    Ok(())
}

/// A job's CPU claim drained: emit its row and run the activity follow-ups.
pub fn on_job_finished(core: &mut Core, st: &mut T0T1State, job: JobId) -> Result<(), RunError> {
    core.sched.finish_job(&mut core.kernel, job)?;
    let (kind, placed, submit, start, end, exported, first_input) = {
        let j = core.sched.job(job).unwrap();
        (
            j.kind,
            j.placed,
            j.submit_time.seconds(),
            j.start_time.map(|t| t.seconds()).unwrap_or(f64::NAN),
            j.end_time.map(|t| t.seconds()).unwrap_or(f64::NAN),
            j.exported,
            j.inputs.first().copied(),
        )
    };
    core.metrics.jobs.push(crate::harness::metrics::JobRow {
        job_id: job.0,
        kind: kind.to_string(),
        center: core.data.site(placed).name.clone(),
        t_submit: submit,
        t_start: start,
        t_end: end,
        exported,
    });

    match kind {
        JobKind::Production => {
            let raw = first_input.ok_or(RunError::Corrupt("production job without input"))?;
            spawn_dst(core, st, placed, raw, false)?;
        }
        JobKind::Reproduction => {
            let raw = first_input.ok_or(RunError::Corrupt("reproduction job without input"))?;
            let include_origin =
                st.repro.as_ref().map(|r| r.include_origin).unwrap_or(false);
            spawn_dst(core, st, placed, raw, include_origin)?;
            pace_reproduction_after(core, st, job)?;
        }
        _ => {}
    }
    Ok(())
}

/// Create the derived DST at the center that produced it and fan it out.
fn spawn_dst(
    core: &mut Core,
    st: &mut T0T1State,
    at: CenterId,
    raw: FileId,
    include_origin: bool,
) -> Result<(), RunError> {
    let (raw_size, event_range) = {
        let record = core.data.file(raw).ok_or(RunError::MissingFile(raw))?;
        (record.size, record.event_range)
    };
    let dist = SizeDistribution::new(st.dst_ratio * raw_size as f64, st.dst_sd);
    let size = dist.sample(&mut core.rng.dst_sizes);
    let now = core.kernel.now();
    let dst_file = core.data.create_file(FileClass::Dst, size, now, event_range);
    core.data.store(dst_file, core.data.site(at).server)?;

    let mut destinations: BTreeSet<CenterId> = st.t1s.iter().copied().collect();
    if include_origin {
        destinations.insert(st.source);
    }
    destinations.remove(&at);
    start_fanout(core, st, dst_file, at, destinations)
}

// ---- fan-out -------------------------------------------------------------------

pub fn start_fanout(
    core: &mut Core,
    st: &mut T0T1State,
    file: FileId,
    source: CenterId,
    destinations: BTreeSet<CenterId>,
) -> Result<(), RunError> {
    if destinations.is_empty() {
        return Ok(());
    }
    let tree = core.plan.fanout_tree(source, &destinations);
    let group = st.next_fanout;
    st.next_fanout += 1;
    st.fanouts.insert(
        group,
        FanoutState { file, source, tree, expected: destinations, delivered: BTreeSet::new() },
    );
    send_fanout_copies(core, st, group, source)
}

fn send_fanout_copies(
    core: &mut Core,
    st: &mut T0T1State,
    group: u64,
    from: CenterId,
) -> Result<(), RunError> {
    let fanout = st.fanouts.get(&group).expect("live fan-out");
    let Some(children) = fanout.tree.get(&from) else { return Ok(()) };
    let children = children.clone();
    let file = fanout.file;
    let record = core.data.file(file).ok_or(RunError::MissingFile(file))?;
    let (class, size) = (record.class, record.size);
    let src_node = core.data.site(from).node;
    for child in children {
        let dst_node = core.data.site(child).node;
        let transfer =
            core.net.start_transfer(&mut core.kernel, file, class, size, src_node, dst_node)?;
        core.purposes.insert(transfer, TransferPurpose::FanoutCopy { group, node: child });
    }
    Ok(())
}

pub fn on_fanout_copy_arrived(
    core: &mut Core,
    st: &mut T0T1State,
    group: u64,
    node: CenterId,
) -> Result<(), RunError> {
    let file = {
        let fanout = st.fanouts.get_mut(&group).expect("live fan-out");
        if fanout.expected.contains(&node) {
            fanout.delivered.insert(node);
        }
        fanout.file
    };
    core.data.store(file, core.data.site(node).server)?;
    send_fanout_copies(core, st, group, node)
}

// ---- reproduction ---------------------------------------------------------------

pub fn on_repro_start(core: &mut Core, st: &mut T0T1State) -> Result<(), RunError> {
    let t1s = st.t1s.clone();
    let Some(repro) = st.repro.as_mut() else { return Ok(()) };
    repro.started = true;
    let max_concurrent = repro.max_concurrent;
    for &center in &t1s {
        let site = core.data.site(center).clone();
        let mut held: VecDeque<FileId> = VecDeque::new();
        for record in core.data.files.values() {
            if record.class == FileClass::Raw
                && (record.replicas.contains(&Location::Disk(site.server))
                    || record.replicas.contains(&Location::Tape(site.mass)))
            {
                held.push_back(record.id);
            }
        }
        repro.queues.insert(center, held);
        repro.in_flight.insert(center, 0);
    }
    for center in t1s {
        for _ in 0..max_concurrent {
            if !submit_next_repro(core, st, center)? {
                break;
            }
        }
    }
    Ok(())
}

fn submit_next_repro(core: &mut Core, st: &mut T0T1State, origin: CenterId) -> Result<bool, RunError> {
    let (file, cpu_work) = {
        let Some(repro) = st.repro.as_mut() else { return Ok(false) };
        let Some(queue) = repro.queues.get_mut(&origin) else { return Ok(false) };
        match queue.pop_front() {
            Some(file) => (file, repro.cpu_work),
            None => return Ok(false),
        }
    };
    let job = submit_job(core, JobKind::Reproduction, cpu_work, vec![file], origin)?;
    if let Some(repro) = st.repro.as_mut() {
        repro.job_origin.insert(job, origin);
        *repro.in_flight.get_mut(&origin).unwrap() += 1;
    }
    Ok(true)
}

fn pace_reproduction_after(core: &mut Core, st: &mut T0T1State, job: JobId) -> Result<(), RunError> {
    let origin = match st.repro.as_mut() {
        Some(repro) => match repro.job_origin.remove(&job) {
            Some(origin) => {
                *repro.in_flight.get_mut(&origin).unwrap() -= 1;
                origin
            }
            None => return Ok(()),
        },
        None => return Ok(()),
    };
    submit_next_repro(core, st, origin)?;
    Ok(())
}

// ---- detector analysis ------------------------------------------------------------

pub fn on_analysis_trigger(core: &mut Core, st: &mut T0T1State, run: usize) -> Result<(), RunError> {
    let (center, trigger, window, max_parallel) = {
        let r = &st.analysis[run];
        (r.center, r.trigger, r.window, r.max_parallel)
    };
    let site = core.data.site(center).clone();
    let mut wanted: VecDeque<FileId> = VecDeque::new();
    for record in core.data.files.values() {
        if record.class != FileClass::Raw {
            continue;
        }
        let created = record.created_at.seconds();
        // Half-open gather window [trigger - W, trigger).
        if created < trigger - window || created >= trigger {
            continue;
        }
        if record.replicas.is_empty() {
            continue;
        }
        let local = record.replicas.contains(&Location::Disk(site.server))
            || record.replicas.contains(&Location::Tape(site.mass));
        if !local {
            wanted.push_back(record.id);
        }
    }
    {
        let r = &mut st.analysis[run];
        r.started = true;
        r.pending = wanted;
    }
    if st.analysis[run].pending.is_empty() {
        complete_analysis(core, st, run);
        return Ok(());
    }
    for _ in 0..max_parallel {
        if !start_next_analysis_fetch(core, st, run)? {
            break;
        }
    }
    // Everything queued may have resolved locally after all.
    let r = &st.analysis[run];
    if r.pending.is_empty() && r.in_flight == 0 && !r.completed {
        complete_analysis(core, st, run);
    }
    Ok(())
}

fn start_next_analysis_fetch(core: &mut Core, st: &mut T0T1State, run: usize) -> Result<bool, RunError> {
    let center = st.analysis[run].center;
    let site = core.data.site(center).clone();
    let (file, center) = loop {
        let r = &mut st.analysis[run];
        let Some(file) = r.pending.pop_front() else { return Ok(false) };
        // A replica may have landed here since the window was enumerated.
        let record = core.data.file(file).ok_or(RunError::MissingFile(file))?;
        let now_local = record.replicas.contains(&Location::Disk(site.server))
            || record.replicas.contains(&Location::Tape(site.mass));
        if now_local {
            continue;
        }
        r.in_flight += 1;
        break (file, r.center);
    };
    let server = core.data.find_optimal(&mut core.net, file, center)?;
    let ticket = core.new_ticket(ServicePurpose::Analysis { run });
    core.data.request_read(&mut core.kernel, server, file, ticket);
    Ok(true)
}

pub fn on_analysis_served(
    core: &mut Core,
    st: &mut T0T1State,
    run: usize,
    server: crate::model::ServerId,
    file: FileId,
) -> Result<(), RunError> {
    let center = st.analysis[run].center;
    if core.data.server(server).center == center {
        // The file became local while the read was queued; nothing to move.
        return on_analysis_fetch_arrived(core, st, run, 0);
    }
    let record = core.data.file(file).ok_or(RunError::MissingFile(file))?;
    let (class, size) = (record.class, record.size);
    let src = core.data.site(core.data.server(server).center).node;
    let dst = core.data.site(center).node;
    let transfer = core.net.start_transfer(&mut core.kernel, file, class, size, src, dst)?;
    core.purposes.insert(transfer, TransferPurpose::AnalysisFetch { run });
    Ok(())
}

pub fn on_analysis_fetch_arrived(
    core: &mut Core,
    st: &mut T0T1State,
    run: usize,
    size: u64,
) -> Result<(), RunError> {
    {
        let r = &mut st.analysis[run];
        r.bytes += size;
        r.in_flight -= 1;
    }
    start_next_analysis_fetch(core, st, run)?;
    let r = &st.analysis[run];
    if r.pending.is_empty() && r.in_flight == 0 && !r.completed {
        complete_analysis(core, st, run);
    }
    Ok(())
}

fn complete_analysis(core: &mut Core, st: &mut T0T1State, run: usize) {
    let r = &mut st.analysis[run];
    r.completed = true;
    core.metrics.activities.push(crate::harness::metrics::ActivityRow {
        activity: "detector_analysis".to_string(),
        center: core.data.site(r.center).name.clone(),
        trigger: r.trigger,
        completion: core.kernel.now().seconds(),
        bytes_moved: r.bytes,
    });
}
