//! Flow-level LAN/WAN model.
//!
//! Links carry piecewise-constant capacities; transfers cross multi-link
//! paths; every transfer start, finish, and capacity change is an interrupt
//! that re-derives all rates by max-min progressive filling, with ftp-like
//! window/RTT ceilings per transfer.

pub mod allocate;
pub mod topology;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{Kernel, SimTime};
use crate::model::{FileClass, FileId, LinkId, NodeId, TransferId};

pub use allocate::{allocate_rates, FlowSpec};
pub use topology::{Link, LinkSpec, Node, RouteSpec, Topology, TopologyError};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("no route between '{src}' and '{dst}'")]
    NoRoute { src: String, dst: String },
    #[error("transfer source and destination are the same node '{0}'")]
    SelfTransfer(String),
    #[error("transfer of zero-size file {0}")]
    EmptyFile(FileId),
    #[error("unknown transfer {0}")]
    UnknownTransfer(TransferId),
    #[error("completion for transfer {transfer} with {remaining} bits left")]
    IncompleteTransfer { transfer: TransferId, remaining: f64 },
}

/// Completion notice for a transfer, stamped with the allocation epoch it was
/// computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferCompletion {
    pub transfer: TransferId,
    pub epoch: u64,
}

/// An in-flight file movement across a link path.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub id: TransferId,
    pub file: FileId,
    pub class: FileClass,
    pub size_bytes: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub path: Vec<LinkId>,
    /// Path round-trip time in seconds.
    pub rtt: f64,
    /// window * 8 / rtt ceiling; `None` on zero-RTT paths.
    pub cap: Option<f64>,
    pub remaining_bits: f64,
    pub rate: f64,
    pub served_bits: f64,
    pub started_at: SimTime,
}

/// A delivered copy, emitted when a transfer drains.
#[derive(Debug, Clone)]
pub struct CompletedTransfer {
    pub id: TransferId,
    pub file: FileId,
    pub class: FileClass,
    pub size_bytes: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub path: Vec<LinkId>,
    pub started_at: SimTime,
    pub finished_at: SimTime,
    pub served_bits: f64,
}

/// All active flows plus the topology they run over.
pub struct Network {
    pub topology: Topology,
    transfers: BTreeMap<TransferId, Transfer>,
    next_transfer: u64,
    /// Bumped on every reallocation; stale completion events don't match it.
    epoch: u64,
    last_update: SimTime,
    /// Protocol window in bytes for the RTT throughput ceiling.
    pub window_bytes: f64,
    pub stale_drops: u64,
}

impl Network {
    pub fn new(topology: Topology, window_bytes: f64) -> Network {
        Network {
            topology,
            transfers: BTreeMap::new(),
            next_transfer: 0,
            epoch: 0,
            last_update: SimTime::ZERO,
            window_bytes,
            stale_drops: 0,
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn active_transfers(&self) -> usize {
        self.transfers.len()
    }

    pub fn transfer(&self, id: TransferId) -> Option<&Transfer> {
        self.transfers.get(&id)
    }

    /// Active transfers in id order.
    pub fn transfers(&self) -> impl Iterator<Item = &Transfer> {
        self.transfers.values()
    }

    /// Serve elapsed bits on every active transfer and integrate link usage.
    pub fn advance(&mut self, now: SimTime) {
        let dt = now - self.last_update;
        if dt > 0.0 {
            for transfer in self.transfers.values_mut() {
                if transfer.rate > 0.0 {
                    let served = transfer.rate * dt;
                    transfer.served_bits += served;
                    transfer.remaining_bits = (transfer.remaining_bits - served).max(0.0);
                }
            }
            for link in &mut self.topology.links {
                link.served_bits += link.current_rate * dt;
                link.capacity_bits += link.capacity * dt;
            }
        }
        self.last_update = now;
    }

    /// Recompute all rates (the "interrupt"), bump the epoch, and enqueue
    /// fresh completion events under it.
    fn reallocate<E: From<TransferCompletion>>(&mut self, kernel: &mut Kernel<E>) {
        let now = kernel.now();
        let capacities: Vec<f64> = self.topology.links.iter().map(|l| l.capacity).collect();
        let flows: Vec<FlowSpec> = self
            .transfers
            .values()
            .map(|t| FlowSpec { links: t.path.iter().map(|l| l.0 as usize).collect(), cap: t.cap })
            .collect();
        let rates = allocate_rates(&capacities, &flows);

        for link in &mut self.topology.links {
            link.current_rate = 0.0;
        }
        self.epoch += 1;
        let epoch = self.epoch;
        for (transfer, rate) in self.transfers.values_mut().zip(rates) {
            transfer.rate = rate;
            for &l in &transfer.path {
                self.topology.links[l.0 as usize].current_rate += rate;
            }
        }
        for transfer in self.transfers.values() {
            if transfer.rate > 0.0 {
                let finish = now + transfer.remaining_bits / transfer.rate;
                let completion = TransferCompletion { transfer: transfer.id, epoch };
                kernel
                    .schedule(finish, None, E::from(completion))
                    .expect("transfer finish cannot precede the clock");
            }
        }
    }

    /// Register a transfer on every link of its path and reallocate.
    pub fn start_transfer<E: From<TransferCompletion>>(
        &mut self,
        kernel: &mut Kernel<E>,
        file: FileId,
        class: FileClass,
        size_bytes: u64,
        src: NodeId,
        dst: NodeId,
    ) -> Result<TransferId, NetworkError> {
        if src == dst {
            return Err(NetworkError::SelfTransfer(self.topology.node_name(src).to_string()));
        }
        if size_bytes == 0 {
            return Err(NetworkError::EmptyFile(file));
        }
        let now = kernel.now();
        self.advance(now);
        let path = self.topology.route(src, dst).ok_or_else(|| NetworkError::NoRoute {
            src: self.topology.node_name(src).to_string(),
            dst: self.topology.node_name(dst).to_string(),
        })?;
        let rtt: f64 = path.iter().map(|&l| self.topology.link(l).rtt).sum();
        let cap = if rtt > 0.0 { Some(self.window_bytes * 8.0 / rtt) } else { None };
        let id = TransferId(self.next_transfer);
        self.next_transfer += 1;
        self.transfers.insert(
            id,
            Transfer {
                id,
                file,
                class,
                size_bytes,
                src,
                dst,
                path,
                rtt,
                cap,
                remaining_bits: size_bytes as f64 * 8.0,
                rate: 0.0,
                served_bits: 0.0,
                started_at: now,
            },
        );
        self.reallocate(kernel);
        Ok(id)
    }

    /// Apply a scheduled capacity breakpoint; every flow crossing the link is
    /// re-rated.
    pub fn capacity_change<E: From<TransferCompletion>>(
        &mut self,
        kernel: &mut Kernel<E>,
        link: LinkId,
        bits_per_second: f64,
    ) {
        let now = kernel.now();
        self.advance(now);
        self.topology.links[link.0 as usize].capacity = bits_per_second;
        self.reallocate(kernel);
    }

    /// Validate a completion against the current epoch; finalize the transfer
    /// if it is current, drop it as stale otherwise.
    pub fn handle_completion<E: From<TransferCompletion>>(
        &mut self,
        kernel: &mut Kernel<E>,
        completion: TransferCompletion,
    ) -> Result<Option<CompletedTransfer>, NetworkError> {
        if completion.epoch != self.epoch {
            self.stale_drops += 1;
            return Ok(None);
        }
        let now = kernel.now();
        self.advance(now);
        let transfer = self
            .transfers
            .get(&completion.transfer)
            .ok_or(NetworkError::UnknownTransfer(completion.transfer))?;
        let size_bits = transfer.size_bytes as f64 * 8.0;
        if transfer.remaining_bits > 1e-6 * size_bits.max(1.0) {
            return Err(NetworkError::IncompleteTransfer {
                transfer: completion.transfer,
                remaining: transfer.remaining_bits,
            });
        }
        let transfer = self.transfers.remove(&completion.transfer).unwrap();
        self.reallocate(kernel);
        Ok(Some(CompletedTransfer {
            id: transfer.id,
            file: transfer.file,
            class: transfer.class,
            size_bytes: transfer.size_bytes,
            src: transfer.src,
            dst: transfer.dst,
            path: transfer.path,
            started_at: transfer.started_at,
            finished_at: now,
            served_bits: transfer.served_bits,
        }))
    }

    /// Rate a hypothetical new transfer would receive right now, without
    /// touching any state. Drives optimal-replica selection.
    pub fn attainable_rate(&mut self, src: NodeId, dst: NodeId) -> Option<f64> {
        if src == dst {
            return Some(f64::INFINITY);
        }
        let path = self.topology.route(src, dst)?;
        let rtt: f64 = path.iter().map(|&l| self.topology.link(l).rtt).sum();
        let cap = if rtt > 0.0 { Some(self.window_bytes * 8.0 / rtt) } else { None };
        let capacities: Vec<f64> = self.topology.links.iter().map(|l| l.capacity).collect();
        let mut flows: Vec<FlowSpec> = self
            .transfers
            .values()
            .map(|t| FlowSpec { links: t.path.iter().map(|l| l.0 as usize).collect(), cap: t.cap })
            .collect();
        flows.push(FlowSpec { links: path.iter().map(|l| l.0 as usize).collect(), cap });
        let rates = allocate_rates(&capacities, &flows);
        rates.last().copied()
    }

    /// Pending capacity breakpoints (time, link, bits/s) after t=0, for the
    /// driver to schedule as events.
    pub fn capacity_breakpoints(&self) -> Vec<(f64, LinkId, f64)> {
        let mut breakpoints = Vec::new();
        for link in &self.topology.links {
            for &(at, bps) in link.schedule.iter().skip(1) {
                breakpoints.push((at, link.id, bps));
            }
        }
        breakpoints.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        breakpoints
    }
}
