use thiserror::Error;

use super::event::{EventQueue, Scheduled};
use super::process::{ProcessId, ProcessRegistry, ProcessState};
use super::resource::{Claim, ResourceId, SharedResource};
use super::time::SimTime;

/// Default limit on events processed at a single timestamp before the run is
/// declared cyclic and aborted.
pub const DEFAULT_SAME_TIME_LIMIT: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("event scheduled in the past: t={event_time} < clock={clock}")]
    EventInPast { event_time: SimTime, clock: SimTime },
    #[error("event cascade at t={at}: more than {limit} events at one timestamp")]
    EventCascade { at: SimTime, limit: u64 },
    #[error("no claim owned by process {owner:?} on resource {resource:?}")]
    UnknownClaimOwner { resource: ResourceId, owner: ProcessId },
    #[error("completion event for {resource:?}/{owner:?} matches epoch {epoch} but claim has {remaining} work left")]
    CompletionWithWorkLeft { resource: ResourceId, owner: ProcessId, epoch: u64, remaining: f64 },
    #[error("unknown resource {0:?}")]
    UnknownResource(ResourceId),
    #[error("{0}")]
    Model(String),
}

/// Completion notice for a resource claim, stamped with the allocation epoch
/// it was computed under. A mismatched epoch means the allocation changed
/// after scheduling and the event is stale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceCompletion {
    pub resource: ResourceId,
    pub owner: ProcessId,
    pub epoch: u64,
}

/// Outcome of validating a completion event against the current epoch.
#[derive(Debug, Clone)]
pub enum CompletionOutcome {
    /// Superseded by a later interrupt; dropped and counted.
    Stale,
    /// The claim drained; it has been removed and its owner should be notified.
    Completed { owner: ProcessId, claim: Claim },
}

/// Counters describing a finished (or partially run) simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationReport {
    pub events_processed: u64,
    pub stale_epoch_drops: u64,
    pub finished_target_drops: u64,
    pub clamp_events: u64,
    pub final_clock: f64,
}

/// One step of the event loop.
pub enum Step<E> {
    /// An event became due and passed target filtering.
    Event(Scheduled<E>),
    /// The queue is exhausted or the next event lies past the horizon.
    Done,
}

/// Deterministic discrete-event kernel: virtual clock, future event list,
/// process registry, and the interrupt-driven shared resources.
///
/// `E` is the scenario's event payload. Resource machinery only requires
/// `E: From<ResourceCompletion>` so completions flow through the same queue
/// as everything else.
pub struct Kernel<E> {
    clock: SimTime,
    queue: EventQueue<E>,
    processes: ProcessRegistry,
    resources: Vec<SharedResource>,
    report: SimulationReport,
    same_time_limit: u64,
    burst_at: SimTime,
    burst_len: u64,
}

impl<E> Default for Kernel<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Kernel<E> {
    pub fn new() -> Kernel<E> {
        Kernel {
            clock: SimTime::ZERO,
            queue: EventQueue::new(),
            processes: ProcessRegistry::default(),
            resources: Vec::new(),
            report: SimulationReport::default(),
            same_time_limit: DEFAULT_SAME_TIME_LIMIT,
            burst_at: SimTime::ZERO,
            burst_len: 0,
        }
    }

    pub fn with_same_time_limit(mut self, limit: u64) -> Kernel<E> {
        self.same_time_limit = limit;
        self
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn report(&self) -> &SimulationReport {
        &self.report
    }

    // ---- processes ------------------------------------------------------

    pub fn spawn(&mut self, name: impl Into<String>) -> ProcessId {
        self.processes.spawn(name)
    }

    pub fn set_process_state(&mut self, id: ProcessId, state: ProcessState) {
        self.processes.set_state(id, state);
    }

    pub fn finish_process(&mut self, id: ProcessId) {
        self.processes.finish(id);
    }

    pub fn process_name(&self, id: ProcessId) -> &str {
        &self.processes.get(id).name
    }

    pub fn process_state(&self, id: ProcessId) -> ProcessState {
        self.processes.get(id).state
    }

    // ---- events ----------------------------------------------------------

    /// Enqueue an event. Scheduling into the past is a logic error and aborts
    /// the run.
    pub fn schedule(
        &mut self,
        time: SimTime,
        target: Option<ProcessId>,
        payload: E,
    ) -> Result<(), EngineError> {
        if time < self.clock {
            return Err(EngineError::EventInPast { event_time: time, clock: self.clock });
        }
        self.queue.push(time, target, payload);
        Ok(())
    }

    /// Pop the next due event at or before `horizon`, advancing the clock.
    ///
    /// Events addressed to finished processes are dropped and counted, not
    /// returned. When the queue runs dry (or only holds later events) the
    /// clock advances to the horizon and `Step::Done` is returned.
    pub fn next_before(&mut self, horizon: SimTime) -> Result<Step<E>, EngineError> {
        loop {
            match self.queue.peek_time() {
                Some(t) if t <= horizon => {
                    let ev = self.queue.pop().expect("peeked event vanished");
                    if ev.time == self.burst_at {
                        self.burst_len += 1;
                        if self.burst_len > self.same_time_limit {
                            return Err(EngineError::EventCascade {
                                at: ev.time,
                                limit: self.same_time_limit,
                            });
                        }
                    } else {
                        self.burst_at = ev.time;
                        self.burst_len = 1;
                    }
                    self.clock = ev.time;
                    if let Some(pid) = ev.target {
                        if self.processes.is_finished(pid) {
                            self.report.finished_target_drops += 1;
                            continue;
                        }
                        self.processes.note_delivery(pid);
                    }
                    self.report.events_processed += 1;
                    return Ok(Step::Event(ev));
                }
                _ => {
                    self.clock = horizon;
                    return Ok(Step::Done);
                }
            }
        }
    }

    /// Drive the loop until `t_end`, dispatching through `handle`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handle: F) -> Result<SimulationReport, EngineError>
    where
        F: FnMut(&mut Kernel<E>, Scheduled<E>) -> Result<(), EngineError>,
    {
        while let Step::Event(ev) = self.next_before(t_end)? {
            handle(self, ev)?;
        }
        self.finalize_report();
        Ok(self.report.clone())
    }

    fn finalize_report(&mut self) {
        self.report.final_clock = self.clock.seconds();
        self.report.clamp_events = self.resources.iter().map(|r| r.clamp_events).sum();
    }
}

impl<E: From<ResourceCompletion>> Kernel<E> {
    // ---- shared resources -------------------------------------------------

    pub fn add_resource(&mut self, name: impl Into<String>, capacity: f64) -> ResourceId {
        let id = ResourceId(self.resources.len() as u32);
        let mut res = SharedResource::new(id, name, capacity);
        res.last_update = self.clock;
        self.resources.push(res);
        id
    }

    pub fn resource(&self, id: ResourceId) -> &SharedResource {
        &self.resources[id.0 as usize]
    }

    pub fn resources(&self) -> &[SharedResource] {
        &self.resources
    }

    /// Serve elapsed work on a resource without changing membership.
    pub fn resource_update(&mut self, id: ResourceId, now: SimTime) {
        self.resources[id.0 as usize].advance(now);
    }

    /// Interrupt: a new claim joins, every sharer's rate and projected finish
    /// are recomputed, and fresh completion events are enqueued under the new
    /// epoch.
    pub fn resource_join(&mut self, id: ResourceId, claim: Claim) -> Result<(), EngineError> {
        let now = self.clock;
        let res = &mut self.resources[id.0 as usize];
        res.advance(now);
        res.claims.push(claim);
        res.epoch += 1;
        res.recompute_rates(now);
        self.reschedule_completions(id);
        Ok(())
    }

    /// Interrupt: a claim leaves (normally via completion) and the survivors'
    /// allocations are redistributed.
    pub fn resource_leave(&mut self, id: ResourceId, owner: ProcessId) -> Result<Claim, EngineError> {
        let now = self.clock;
        let res = &mut self.resources[id.0 as usize];
        res.advance(now);
        let pos = res
            .position_of(owner)
            .ok_or(EngineError::UnknownClaimOwner { resource: id, owner })?;
        let removed = res.claims.remove(pos);
        res.epoch += 1;
        res.recompute_rates(now);
        self.reschedule_completions(id);
        Ok(removed)
    }

    /// Interrupt: the capacity itself changes (time-dependent resources).
    pub fn resource_set_capacity(&mut self, id: ResourceId, capacity: f64) {
        let now = self.clock;
        let res = &mut self.resources[id.0 as usize];
        res.advance(now);
        res.capacity = capacity;
        res.epoch += 1;
        res.recompute_rates(now);
        self.reschedule_completions(id);
    }

    /// Validate a completion notice against the resource's current epoch.
    /// Stale notices are dropped and counted; valid ones finalize the claim.
    pub fn handle_completion(
        &mut self,
        completion: ResourceCompletion,
    ) -> Result<CompletionOutcome, EngineError> {
        let res = &self.resources[completion.resource.0 as usize];
        if completion.epoch != res.epoch {
            self.report.stale_epoch_drops += 1;
            return Ok(CompletionOutcome::Stale);
        }
        {
            let now = self.clock;
            let res = &mut self.resources[completion.resource.0 as usize];
            res.advance(now);
            let claim = res.claim_of(completion.owner).ok_or(EngineError::UnknownClaimOwner {
                resource: completion.resource,
                owner: completion.owner,
            })?;
            if !claim.is_drained() {
                return Err(EngineError::CompletionWithWorkLeft {
                    resource: completion.resource,
                    owner: completion.owner,
                    epoch: completion.epoch,
                    remaining: claim.remaining,
                });
            }
        }
        let claim = self.resource_leave(completion.resource, completion.owner)?;
        Ok(CompletionOutcome::Completed { owner: completion.owner, claim })
    }

    fn reschedule_completions(&mut self, id: ResourceId) {
        let res = &self.resources[id.0 as usize];
        let epoch = res.epoch;
        let pending: Vec<(SimTime, ProcessId)> = res
            .claims
            .iter()
            .filter_map(|c| c.projected_finish.map(|t| (t, c.owner)))
            .collect();
        for (time, owner) in pending {
            let completion = ResourceCompletion { resource: id, owner, epoch };
            self.queue.push(time, Some(owner), E::from(completion));
        }
    }
}
