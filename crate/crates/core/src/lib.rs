//! Flow-level discrete-event simulator for distributed data-processing grids.
//!
//! The building blocks: a deterministic event kernel with interrupt-driven
//! fair sharing ([`engine`]), a max-min fair WAN/LAN flow model ([`network`]),
//! replica-cataloged storage with disk-to-tape migration ([`datalayer`]),
//! threshold-based distributed job scheduling with relay-agent file fan-out
//! ([`scheduling`]), workload generators for a tiered replication grid and a
//! master/worker analysis cluster ([`scenarios`]), and the configuration,
//! metrics, and CSV plumbing that turns those into reproducible runs
//! ([`harness`]).

pub mod datalayer;
pub mod engine;
pub mod harness;
pub mod model;
pub mod network;
pub mod scenarios;
pub mod scheduling;

pub use engine::{Kernel, SimTime, SimulationReport};
