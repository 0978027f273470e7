//! Files, database servers, mass storage, and the replica catalog.
//!
//! Database servers keep files on disk and serve read requests through a
//! FIFO queue with configurable parallelism. When an insert outgrows the
//! disk, least-recently-accessed files migrate to the center's mass storage;
//! touching a tape-resident file later stages it back at mount cost. The
//! catalog tracks every replica and answers closest- and optimal-server
//! queries for requesters anywhere in the topology.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::engine::{Kernel, SimTime};
use crate::model::{CenterId, FileClass, FileId, MassId, NodeId, ServerId, TransferId};
use crate::network::Network;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file {file} ({size} B) exceeds disk+tape capacity at center {center}")]
    FileTooLarge { file: FileId, size: u64, center: CenterId },
    #[error("mass storage at center {center} is full ({needed} B needed)")]
    MassStorageFull { center: CenterId, needed: u64 },
    #[error("file {0} has no replica")]
    NoReplica(FileId),
    #[error("unknown file {0}")]
    UnknownFile(FileId),
    #[error("network error: {0}")]
    Network(#[from] crate::network::NetworkError),
}

/// Where a replica physically lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Location {
    Disk(ServerId),
    Tape(MassId),
}

/// A RAW or DST data file and the replicas the catalog knows about.
#[derive(Debug, Clone)]
pub struct FileRecord {
    pub id: FileId,
    pub class: FileClass,
    pub size: u64,
    pub created_at: SimTime,
    pub event_range: (u64, u64),
    pub replicas: BTreeSet<Location>,
}

/// Read request waiting for (or holding) a service slot.
#[derive(Debug, Clone)]
struct ReadRequest {
    file: FileId,
    ticket: u64,
}

/// Service completion for one read request. The driver resumes the read
/// (starting a transfer, handing data to a job) keyed by `ticket`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceDone {
    pub server: ServerId,
    pub file: FileId,
    pub ticket: u64,
    pub staged_from_tape: bool,
}

/// Disk-backed database server with sequential (or limited-parallel) request
/// service.
#[derive(Debug)]
pub struct DbServer {
    pub id: ServerId,
    pub center: CenterId,
    pub disk_capacity: u64,
    pub used: u64,
    pub service_time: f64,
    pub parallelism: u32,
    busy: u32,
    queue: VecDeque<ReadRequest>,
    resident: BTreeSet<FileId>,
    /// Recency bookkeeping: touch counter -> file, plus the reverse index.
    lru_seq: u64,
    lru: BTreeMap<u64, FileId>,
    lru_of: BTreeMap<FileId, u64>,
}

impl DbServer {
    pub fn pending_requests(&self) -> u64 {
        self.busy as u64 + self.queue.len() as u64
    }

    pub fn is_resident(&self, file: FileId) -> bool {
        self.resident.contains(&file)
    }

    pub fn resident_files(&self) -> impl Iterator<Item = &FileId> {
        self.resident.iter()
    }

    fn touch(&mut self, file: FileId) {
        if let Some(old) = self.lru_of.remove(&file) {
            self.lru.remove(&old);
        }
        self.lru_seq += 1;
        self.lru.insert(self.lru_seq, file);
        self.lru_of.insert(file, self.lru_seq);
    }

    fn forget(&mut self, file: FileId) {
        if let Some(seq) = self.lru_of.remove(&file) {
            self.lru.remove(&seq);
        }
        self.resident.remove(&file);
    }

    fn least_recent(&self) -> Option<FileId> {
        self.lru.values().next().copied()
    }
}

/// Tape-backed mass storage.
#[derive(Debug)]
pub struct MassStorage {
    pub id: MassId,
    pub center: CenterId,
    /// `None` models effectively unbounded tape.
    pub capacity: Option<u64>,
    pub used: u64,
    pub mount_latency: f64,
    resident: BTreeSet<FileId>,
}

impl MassStorage {
    pub fn is_resident(&self, file: FileId) -> bool {
        self.resident.contains(&file)
    }
}

/// A regional center's storage identity: its node plus its disk and tape.
#[derive(Debug, Clone)]
pub struct Site {
    pub center: CenterId,
    pub name: String,
    pub node: NodeId,
    pub server: ServerId,
    pub mass: MassId,
}

/// The metadata catalog plus every site's storage state.
#[derive(Debug, Default)]
pub struct DataLayer {
    pub files: BTreeMap<FileId, FileRecord>,
    pub servers: Vec<DbServer>,
    pub mass: Vec<MassStorage>,
    pub sites: Vec<Site>,
    next_file: u64,
    /// Completed disk→tape moves, for diagnostics.
    pub migrations: u64,
    /// Tape stage-backs performed on access.
    pub tape_mounts: u64,
}

impl DataLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn add_site(
        &mut self,
        name: impl Into<String>,
        node: NodeId,
        disk_capacity: u64,
        service_time: f64,
        parallelism: u32,
        mass_capacity: Option<u64>,
        mount_latency: f64,
    ) -> CenterId {
        let center = CenterId(self.sites.len() as u32);
        let server = ServerId(self.servers.len() as u32);
        let mass = MassId(self.mass.len() as u32);
        self.servers.push(DbServer {
            id: server,
            center,
            disk_capacity,
            used: 0,
            service_time,
            parallelism: parallelism.max(1),
            busy: 0,
            queue: VecDeque::new(),
            resident: BTreeSet::new(),
            lru_seq: 0,
            lru: BTreeMap::new(),
            lru_of: BTreeMap::new(),
        });
        self.mass.push(MassStorage {
            id: mass,
            center,
            capacity: mass_capacity,
            used: 0,
            mount_latency,
            resident: BTreeSet::new(),
        });
        self.sites.push(Site { center, name: name.into(), node, server, mass });
        center
    }

    pub fn site(&self, center: CenterId) -> &Site {
        &self.sites[center.0 as usize]
    }

    pub fn site_by_name(&self, name: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.name == name)
    }

    pub fn server(&self, id: ServerId) -> &DbServer {
        &self.servers[id.0 as usize]
    }

    pub fn mass_storage(&self, id: MassId) -> &MassStorage {
        &self.mass[id.0 as usize]
    }

    pub fn file(&self, id: FileId) -> Option<&FileRecord> {
        self.files.get(&id)
    }

    /// Register a brand-new file in the catalog (no replica yet).
    pub fn create_file(
        &mut self,
        class: FileClass,
        size: u64,
        created_at: SimTime,
        event_range: (u64, u64),
    ) -> FileId {
        let id = FileId(self.next_file);
        self.next_file += 1;
        self.files.insert(
            id,
            FileRecord { id, class, size, created_at, event_range, replicas: BTreeSet::new() },
        );
        id
    }

    /// Make `file` resident on `server`'s disk, migrating colder files to
    /// tape if the insert would overflow, and record the replica. Re-storing
    /// a resident file just refreshes its recency.
    pub fn store(&mut self, file: FileId, server: ServerId) -> Result<(), DataError> {
        let record = self.files.get(&file).ok_or(DataError::UnknownFile(file))?;
        let size = record.size;
        let center = self.servers[server.0 as usize].center;
        if self.servers[server.0 as usize].is_resident(file) {
            self.servers[server.0 as usize].touch(file);
            return Ok(());
        }
        let disk_capacity = self.servers[server.0 as usize].disk_capacity;
        let tape_room =
            self.mass[self.site(center).mass.0 as usize].capacity.unwrap_or(u64::MAX);
        if size > disk_capacity.saturating_add(tape_room) {
            return Err(DataError::FileTooLarge { file, size, center });
        }
        let free = disk_capacity - self.servers[server.0 as usize].used;
        if size > free {
            self.migrate(server, size)?;
        }
        let srv = &mut self.servers[server.0 as usize];
        srv.used += size;
        srv.resident.insert(file);
        srv.touch(file);
        self.files.get_mut(&file).unwrap().replicas.insert(Location::Disk(server));
        Ok(())
    }

    /// Store locally and push replicas to other servers over the network.
    /// Returns the started transfers; the caller registers each replica by
    /// calling [`DataLayer::store`] for the destination when its transfer
    /// completes.
    pub fn store_with_replicas<E: From<crate::network::TransferCompletion>>(
        &mut self,
        kernel: &mut Kernel<E>,
        net: &mut Network,
        file: FileId,
        server: ServerId,
        replicate_to: &[ServerId],
    ) -> Result<Vec<(TransferId, ServerId)>, DataError> {
        self.store(file, server)?;
        let record = self.files.get(&file).ok_or(DataError::UnknownFile(file))?;
        let (class, size) = (record.class, record.size);
        let src_node = self.site(self.servers[server.0 as usize].center).node;
        let mut started = Vec::new();
        for &target in replicate_to {
            if target == server {
                continue;
            }
            let dst_node = self.site(self.servers[target.0 as usize].center).node;
            let transfer = net.start_transfer(kernel, file, class, size, src_node, dst_node)?;
            started.push((transfer, target));
        }
        Ok(started)
    }

    /// Move least-recently-accessed files to tape until at least `needed`
    /// bytes are free on the server's disk.
    pub fn migrate(&mut self, server: ServerId, needed: u64) -> Result<Vec<(FileId, MassId)>, DataError> {
        let center = self.servers[server.0 as usize].center;
        let mass_id = self.site(center).mass;
        let mut moves = Vec::new();
        loop {
            let srv = &self.servers[server.0 as usize];
            let free = srv.disk_capacity - srv.used;
            if free >= needed {
                break;
            }
            let victim = srv.least_recent().ok_or(DataError::MassStorageFull {
                center,
                needed,
            })?;
            let size = self.files[&victim].size;
            let mass = &mut self.mass[mass_id.0 as usize];
            if let Some(cap) = mass.capacity {
                if mass.used + size > cap {
                    return Err(DataError::MassStorageFull { center, needed });
                }
            }
            mass.used += size;
            mass.resident.insert(victim);
            let srv = &mut self.servers[server.0 as usize];
            srv.forget(victim);
            srv.used -= size;
            let record = self.files.get_mut(&victim).unwrap();
            record.replicas.remove(&Location::Disk(server));
            record.replicas.insert(Location::Tape(mass_id));
            self.migrations += 1;
            moves.push((victim, mass_id));
        }
        Ok(moves)
    }

    /// Stage a tape-resident file back onto the center's disk.
    fn stage_back(&mut self, file: FileId, server: ServerId) -> Result<(), DataError> {
        let center = self.servers[server.0 as usize].center;
        let mass_id = self.site(center).mass;
        let size = self.files[&file].size;
        {
            let mass = &mut self.mass[mass_id.0 as usize];
            if !mass.resident.remove(&file) {
                return Ok(());
            }
            mass.used -= size;
        }
        let record = self.files.get_mut(&file).unwrap();
        record.replicas.remove(&Location::Tape(mass_id));
        self.tape_mounts += 1;
        self.store(file, server)
    }

    // ---- read service -----------------------------------------------------

    /// Queue a read of `file` at `server`. The `ticket` is an opaque caller
    /// correlation id returned in the [`ServiceDone`] event once the request
    /// has waited its turn and been served.
    pub fn request_read<E: From<ServiceDone>>(
        &mut self,
        kernel: &mut Kernel<E>,
        server: ServerId,
        file: FileId,
        ticket: u64,
    ) {
        self.servers[server.0 as usize].queue.push_back(ReadRequest { file, ticket });
        self.dispatch_reads(kernel, server);
    }

    fn dispatch_reads<E: From<ServiceDone>>(&mut self, kernel: &mut Kernel<E>, server: ServerId) {
        let now = kernel.now();
        loop {
            let srv = &mut self.servers[server.0 as usize];
            if srv.busy >= srv.parallelism || srv.queue.is_empty() {
                break;
            }
            let req = srv.queue.pop_front().unwrap();
            srv.busy += 1;
            let center = srv.center;
            let service_time = srv.service_time;
            let on_tape = self.mass[self.site(center).mass.0 as usize].is_resident(req.file);
            let delay = service_time
                + if on_tape { self.mass[self.site(center).mass.0 as usize].mount_latency } else { 0.0 };
            let done = ServiceDone {
                server,
                file: req.file,
                ticket: req.ticket,
                staged_from_tape: on_tape,
            };
            kernel
                .schedule(now + delay, None, E::from(done))
                .expect("service completion cannot precede the clock");
        }
    }

    /// Finish one service slot: stage the file back from tape if needed,
    /// refresh recency, and pull the next queued request into service.
    pub fn complete_service<E: From<ServiceDone>>(
        &mut self,
        kernel: &mut Kernel<E>,
        done: &ServiceDone,
    ) -> Result<(), DataError> {
        let srv = &mut self.servers[done.server.0 as usize];
        debug_assert!(srv.busy > 0);
        srv.busy -= 1;
        if done.staged_from_tape {
            self.stage_back(done.file, done.server)?;
        } else if self.servers[done.server.0 as usize].is_resident(done.file) {
            self.servers[done.server.0 as usize].touch(done.file);
        }
        self.dispatch_reads(kernel, done.server);
        Ok(())
    }

    // ---- replica selection --------------------------------------------------

    fn candidate_servers(&self, file: FileId) -> Result<Vec<ServerId>, DataError> {
        let record = self.files.get(&file).ok_or(DataError::UnknownFile(file))?;
        let mut centers: BTreeSet<CenterId> = BTreeSet::new();
        for loc in &record.replicas {
            match loc {
                Location::Disk(s) => centers.insert(self.servers[s.0 as usize].center),
                Location::Tape(m) => centers.insert(self.mass[m.0 as usize].center),
            };
        }
        if centers.is_empty() {
            return Err(DataError::NoReplica(file));
        }
        Ok(centers.into_iter().map(|c| self.site(c).server).collect())
    }

    /// The replica server with minimum path RTT from the requester, ties by
    /// server id.
    pub fn find_closest(
        &self,
        net: &mut Network,
        file: FileId,
        requester: CenterId,
    ) -> Result<ServerId, DataError> {
        let from = self.site(requester).node;
        let mut best: Option<(f64, ServerId)> = None;
        for server in self.candidate_servers(file)? {
            let node = self.site(self.servers[server.0 as usize].center).node;
            let rtt = net.topology.path_rtt(from, node).unwrap_or(f64::INFINITY);
            let key = (rtt, server);
            if best.is_none_or(|(brtt, bsrv)| (rtt, server) < (brtt, bsrv)) {
                best = Some(key);
            }
        }
        Ok(best.expect("candidates checked non-empty").1)
    }

    /// The replica minimizing estimated fetch cost: projected transfer time at
    /// the rate a fresh flow would get (window/RTT-capped) plus the server's
    /// queued service backlog. Ties fall back to proximity, then server id.
    pub fn find_optimal(
        &self,
        net: &mut Network,
        file: FileId,
        requester: CenterId,
    ) -> Result<ServerId, DataError> {
        let record = self.files.get(&file).ok_or(DataError::UnknownFile(file))?;
        let size_bits = record.size as f64 * 8.0;
        let to = self.site(requester).node;
        let mut best: Option<((f64, f64, ServerId), ServerId)> = None;
        for server in self.candidate_servers(file)? {
            let srv = &self.servers[server.0 as usize];
            let node = self.site(srv.center).node;
            let queue_delay = srv.pending_requests() as f64 * srv.service_time;
            let transfer_time = if srv.center == requester {
                0.0
            } else {
                match net.attainable_rate(node, to) {
                    Some(rate) if rate > 0.0 && rate.is_finite() => size_bits / rate,
                    Some(_) => 0.0,
                    None => f64::INFINITY,
                }
            };
            let cost = transfer_time + queue_delay;
            let rtt = net.topology.path_rtt(to, node).unwrap_or(f64::INFINITY);
            let key = (cost, rtt, server);
            if best.is_none_or(|(bkey, _)| key < bkey) {
                best = Some((key, server));
            }
        }
        Ok(best.expect("candidates checked non-empty").1)
    }

    // ---- audits ---------------------------------------------------------------

    /// Cross-check the catalog against physical residency. Returns violation
    /// descriptions (empty when consistent).
    pub fn audit(&self) -> Vec<String> {
        let mut violations = Vec::new();
        for record in self.files.values() {
            for loc in &record.replicas {
                match loc {
                    Location::Disk(s) => {
                        if !self.servers[s.0 as usize].is_resident(record.id) {
                            violations.push(format!(
                                "catalog lists file {} on server {} but it is not resident",
                                record.id, s
                            ));
                        }
                    }
                    Location::Tape(m) => {
                        if !self.mass[m.0 as usize].is_resident(record.id) {
                            violations.push(format!(
                                "catalog lists file {} on tape {} but it is not resident",
                                record.id, m
                            ));
                        }
                    }
                }
            }
        }
        for srv in &self.servers {
            let mut used = 0u64;
            for file in &srv.resident {
                match self.files.get(file) {
                    Some(record) => {
                        used += record.size;
                        if !record.replicas.contains(&Location::Disk(srv.id)) {
                            violations.push(format!(
                                "file {} resident on server {} but missing from catalog",
                                file, srv.id
                            ));
                        }
                    }
                    None => violations.push(format!("server {} holds unknown file {}", srv.id, file)),
                }
            }
            if used != srv.used {
                violations.push(format!(
                    "server {} used-bytes drift: tracked {} vs actual {}",
                    srv.id, srv.used, used
                ));
            }
            if srv.used > srv.disk_capacity {
                violations.push(format!(
                    "server {} over capacity: {} > {}",
                    srv.id, srv.used, srv.disk_capacity
                ));
            }
        }
        for mass in &self.mass {
            let mut used = 0u64;
            for file in &mass.resident {
                match self.files.get(file) {
                    Some(record) => {
                        used += record.size;
                        if !record.replicas.contains(&Location::Tape(mass.id)) {
                            violations.push(format!(
                                "file {} resident on tape {} but missing from catalog",
                                file, mass.id
                            ));
                        }
                    }
                    None => violations.push(format!("tape {} holds unknown file {}", mass.id, file)),
                }
            }
            if used != mass.used {
                violations.push(format!(
                    "tape {} used-bytes drift: tracked {} vs actual {}",
                    mass.id, mass.used, used
                ));
            }
        }
        violations
    }
}
