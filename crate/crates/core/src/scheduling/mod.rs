//! Per-center job scheduling and the transfer-agent fan-out mechanism.
//!
//! Each center runs its jobs on a CPU farm modeled as one shared resource of
//! aggregate capacity, every running job claiming at most one CPU's worth.
//! A local scheduler exports jobs to the least-loaded remote center when its
//! own load exceeds a threshold. File fan-outs route through relay agents so
//! an expensive link carries each file exactly once.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::engine::{Claim, EngineError, Kernel, ProcessId, ResourceCompletion, ResourceId, SimTime};
use crate::model::{CenterId, FileId, JobId};

#[derive(Debug, Error)]
pub enum SchedulingError {
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("job {0} staged an input it never requested")]
    UnexpectedStaging(JobId),
    #[error("agent plan cycle involving relay '{0}'")]
    PlanCycle(String),
    #[error("relay downstream sets overlap on '{0}'")]
    OverlappingDownstream(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobKind {
    Production,
    Reproduction,
    Analysis,
    Generic,
}

impl std::fmt::Display for JobKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JobKind::Production => write!(f, "production"),
            JobKind::Reproduction => write!(f, "reproduction"),
            JobKind::Analysis => write!(f, "analysis"),
            JobKind::Generic => write!(f, "generic"),
        }
    }
}

/// A unit of CPU work bound to input files and an origin center.
#[derive(Debug)]
pub struct Job {
    pub id: JobId,
    pub kind: JobKind,
    pub cpu_work: f64,
    pub inputs: Vec<FileId>,
    pub origin: CenterId,
    pub placed: CenterId,
    pub submit_time: SimTime,
    pub start_time: Option<SimTime>,
    pub end_time: Option<SimTime>,
    pub exported: bool,
    pub process: ProcessId,
    pub failed: bool,
    staging_pending: usize,
}

/// A center's CPU farm: one processor-shared resource plus scheduling knobs.
#[derive(Debug, Clone)]
pub struct Farm {
    pub center: CenterId,
    pub resource: ResourceId,
    pub cpus: u32,
    pub per_cpu_ops: f64,
    pub threshold: f64,
}

impl Farm {
    pub fn capacity(&self) -> f64 {
        self.cpus as f64 * self.per_cpu_ops
    }
}

/// Placement outcome of a submit decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub center: CenterId,
    pub exported: bool,
}

#[derive(Debug, Default)]
pub struct Scheduler {
    pub farms: Vec<Farm>,
    pub jobs: BTreeMap<JobId, Job>,
    next_job: u64,
    /// Jobs whose CPU claims joined each farm, in join order (for audits).
    pub start_order: BTreeMap<CenterId, Vec<JobId>>,
}

impl Scheduler {
    pub fn add_farm<E: From<ResourceCompletion>>(
        &mut self,
        kernel: &mut Kernel<E>,
        center: CenterId,
        name: &str,
        cpus: u32,
        per_cpu_ops: f64,
        threshold: f64,
    ) -> &Farm {
        let resource = kernel.add_resource(format!("farm:{name}"), cpus as f64 * per_cpu_ops);
        self.farms.push(Farm { center, resource, cpus, per_cpu_ops, threshold });
        self.farms.last().unwrap()
    }

    pub fn farm(&self, center: CenterId) -> &Farm {
        &self.farms[center.0 as usize]
    }

    /// Instantaneous load: CPU demand of active claims over farm capacity.
    /// Every running job demands one CPU, so this is simply claims / cpus and
    /// may exceed 1 under processor sharing.
    pub fn load<E: From<ResourceCompletion>>(&self, kernel: &Kernel<E>, center: CenterId) -> f64 {
        let farm = self.farm(center);
        kernel.resource(farm.resource).claims.len() as f64 / farm.cpus as f64
    }

    /// Threshold rule: run locally while local load stays at or below the
    /// threshold, else export to the remote center with minimum average load
    /// (ties by center id).
    pub fn place<E: From<ResourceCompletion>>(
        &self,
        kernel: &Kernel<E>,
        origin: CenterId,
    ) -> Placement {
        let farm = self.farm(origin);
        if self.load(kernel, origin) <= farm.threshold {
            return Placement { center: origin, exported: false };
        }
        let mut best: Option<(f64, CenterId)> = None;
        for other in &self.farms {
            if other.center == origin {
                continue;
            }
            let load = self.load(kernel, other.center);
            if best.is_none_or(|(bl, bc)| (load, other.center) < (bl, bc)) {
                best = Some((load, other.center));
            }
        }
        match best {
            Some((_, center)) => Placement { center, exported: true },
            None => Placement { center: origin, exported: false },
        }
    }

    /// Register a job and decide where it runs. Inputs are resolved by the
    /// caller (locally or via staged transfers); once `staging_pending`
    /// reaches zero the CPU phase can start.
    pub fn submit<E: From<ResourceCompletion>>(
        &mut self,
        kernel: &mut Kernel<E>,
        kind: JobKind,
        cpu_work: f64,
        inputs: Vec<FileId>,
        origin: CenterId,
    ) -> JobId {
        let placement = self.place(kernel, origin);
        let id = JobId(self.next_job);
        self.next_job += 1;
        let process = kernel.spawn(format!("job:{id}"));
        self.jobs.insert(
            id,
            Job {
                id,
                kind,
                cpu_work,
                inputs,
                origin,
                placed: placement.center,
                submit_time: kernel.now(),
                start_time: None,
                end_time: None,
                exported: placement.exported,
                process,
                failed: false,
                staging_pending: 0,
            },
        );
        id
    }

    pub fn job(&self, id: JobId) -> Option<&Job> {
        self.jobs.get(&id)
    }

    pub fn job_by_process(&self, process: ProcessId) -> Option<JobId> {
        self.jobs.values().find(|j| j.process == process).map(|j| j.id)
    }

    /// Note that `count` inputs are being staged for the job.
    pub fn expect_staged_inputs(&mut self, job: JobId, count: usize) -> Result<(), SchedulingError> {
        let job = self.jobs.get_mut(&job).ok_or(SchedulingError::UnknownJob(job))?;
        job.staging_pending += count;
        Ok(())
    }

    /// One staged input arrived. Returns true when all inputs are resolved.
    pub fn input_staged(&mut self, job: JobId) -> Result<bool, SchedulingError> {
        let id = job;
        let job = self.jobs.get_mut(&job).ok_or(SchedulingError::UnknownJob(job))?;
        if job.staging_pending == 0 {
            return Err(SchedulingError::UnexpectedStaging(id));
        }
        job.staging_pending -= 1;
        Ok(job.staging_pending == 0)
    }

    pub fn inputs_pending(&self, job: JobId) -> usize {
        self.jobs.get(&job).map_or(0, |j| j.staging_pending)
    }

    /// Start the CPU phase: the job joins the farm as one claim capped at a
    /// single CPU's worth.
    pub fn start_cpu_phase<E: From<ResourceCompletion>>(
        &mut self,
        kernel: &mut Kernel<E>,
        job: JobId,
    ) -> Result<(), SchedulingError> {
        let j = self.jobs.get_mut(&job).ok_or(SchedulingError::UnknownJob(job))?;
        let farm = &self.farms[j.placed.0 as usize];
        debug_assert_eq!(farm.center, j.placed);
        j.start_time = Some(kernel.now());
        let claim = Claim::new(j.process, j.cpu_work, 1.0, Some(farm.per_cpu_ops));
        kernel.resource_join(farm.resource, claim)?;
        self.start_order.entry(j.placed).or_default().push(job);
        Ok(())
    }

    /// Finalize a job whose farm claim completed.
    pub fn finish_job<E: From<ResourceCompletion>>(
        &mut self,
        kernel: &mut Kernel<E>,
        job: JobId,
    ) -> Result<(), SchedulingError> {
        let j = self.jobs.get_mut(&job).ok_or(SchedulingError::UnknownJob(job))?;
        j.end_time = Some(kernel.now());
        kernel.finish_process(j.process);
        Ok(())
    }

    /// Mark a job failed (missing replica, unreachable input).
    pub fn fail_job<E>(&mut self, kernel: &mut Kernel<E>, job: JobId) -> Result<(), SchedulingError> {
        let j = self.jobs.get_mut(&job).ok_or(SchedulingError::UnknownJob(job))?;
        j.failed = true;
        j.end_time = Some(kernel.now());
        kernel.finish_process(j.process);
        Ok(())
    }
}

// ---- transfer agents ---------------------------------------------------------

/// Relay plan: each relay forwards copies to its downstream set, so the link
/// toward the relay carries the file once regardless of fan-out width.
#[derive(Debug, Clone, Default)]
pub struct AgentPlan {
    relays: BTreeMap<CenterId, BTreeSet<CenterId>>,
}

impl AgentPlan {
    pub fn new() -> AgentPlan {
        AgentPlan::default()
    }

    pub fn add_relay(&mut self, relay: CenterId, downstream: BTreeSet<CenterId>) {
        self.relays.insert(relay, downstream);
    }

    pub fn is_empty(&self) -> bool {
        self.relays.is_empty()
    }

    /// Validate at load time: downstream sets must be pairwise disjoint and
    /// relay chains must not cycle.
    pub fn validate(&self, name_of: impl Fn(CenterId) -> String) -> Result<(), SchedulingError> {
        let mut seen: BTreeSet<CenterId> = BTreeSet::new();
        for (relay, downstream) in &self.relays {
            for d in downstream {
                if d == relay {
                    return Err(SchedulingError::PlanCycle(name_of(*relay)));
                }
                if !seen.insert(*d) {
                    return Err(SchedulingError::OverlappingDownstream(name_of(*d)));
                }
            }
        }
        for &relay in self.relays.keys() {
            let mut hops = 0usize;
            let mut here = relay;
            while let Some(parent) = self.serving_relay(here, None) {
                here = parent;
                hops += 1;
                if hops > self.relays.len() {
                    return Err(SchedulingError::PlanCycle(name_of(relay)));
                }
            }
        }
        Ok(())
    }

    /// The relay that delivers to `node`, if any. A relay equal to `source`
    /// is skipped: the source already holds the file and sends directly.
    fn serving_relay(&self, node: CenterId, source: Option<CenterId>) -> Option<CenterId> {
        for (&relay, downstream) in &self.relays {
            if Some(relay) == source || relay == node {
                continue;
            }
            if downstream.contains(&node) {
                return Some(relay);
            }
        }
        None
    }

    /// Compute the delivery tree for one fan-out: a map from sender to the
    /// ordered receivers it sends a copy to. Every destination appears as a
    /// receiver exactly once; relays are inserted as intermediate receivers
    /// when they serve at least one destination.
    pub fn fanout_tree(
        &self,
        source: CenterId,
        destinations: &BTreeSet<CenterId>,
    ) -> BTreeMap<CenterId, Vec<CenterId>> {
        let mut sends: BTreeMap<CenterId, Vec<CenterId>> = BTreeMap::new();
        let mut included: BTreeSet<CenterId> = BTreeSet::new();
        included.insert(source);
        for &dest in destinations {
            self.include(source, dest, &mut included, &mut sends);
        }
        sends
    }

    fn include(
        &self,
        source: CenterId,
        node: CenterId,
        included: &mut BTreeSet<CenterId>,
        sends: &mut BTreeMap<CenterId, Vec<CenterId>>,
    ) {
        if included.contains(&node) {
            return;
        }
        let parent = match self.serving_relay(node, Some(source)) {
            Some(relay) => {
                self.include(source, relay, included, sends);
                relay
            }
            None => source,
        };
        sends.entry(parent).or_default().push(node);
        included.insert(node);
    }
}
