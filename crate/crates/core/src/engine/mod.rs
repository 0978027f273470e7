//! Deterministic discrete-event kernel.
//!
//! Virtual clock, a future event list ordered by (time, sequence), a process
//! registry, and shared resources whose claims are re-allocated on every
//! join/leave/capacity interrupt. Completion events are never deleted from
//! the queue; they carry the allocation epoch they were computed under and
//! are dropped as stale if the epoch moved on.

pub mod event;
pub mod kernel;
pub mod process;
pub mod resource;
pub mod time;

pub use event::{EventQueue, Scheduled};
pub use kernel::{
    CompletionOutcome, EngineError, Kernel, ResourceCompletion, SimulationReport, Step,
    DEFAULT_SAME_TIME_LIMIT,
};
pub use process::{Process, ProcessId, ProcessRegistry, ProcessState};
pub use resource::{Claim, ResourceId, SharedResource};
pub use time::{SimTime, EPSILON, REL_EPSILON};
