//! Workload generators and the simulation driver.
//!
//! Two shipped scenario families: the tiered T0/T1 replication study (RAW
//! recording, production, reproduction, detector analysis) and the
//! master/slave analysis cluster with pull-based work packets.

pub mod proof;
pub mod t0t1;
pub mod world;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rand_pcg::Pcg64;

use crate::datalayer::ServiceDone;
use crate::engine::ResourceCompletion;
use crate::model::{CenterId, FileId, JobId, LinkId};
use crate::network::TransferCompletion;

/// Scenario event payload dispatched by the world driver.
#[derive(Debug, Clone)]
pub enum Event {
    ResourceDone(ResourceCompletion),
    TransferDone(TransferCompletion),
    Served(ServiceDone),
    LinkCapacity { link: LinkId, bps: f64 },
    MetricsTick,
    /// Next RAW file finished recording at the source center.
    RawFileTick,
    /// Reprocessing kicks off at every tier-1 center.
    ReproStart,
    /// A center's daily gather reached its local start time.
    AnalysisTrigger { run: usize },
    /// A cluster client submits (or re-submits) a processing request.
    ProofClientRequest { master: usize },
    /// The master finished handling one queued message.
    ProofMasterDone { master: usize },
}

impl From<ResourceCompletion> for Event {
    fn from(c: ResourceCompletion) -> Event {
        Event::ResourceDone(c)
    }
}

impl From<TransferCompletion> for Event {
    fn from(c: TransferCompletion) -> Event {
        Event::TransferDone(c)
    }
}

impl From<ServiceDone> for Event {
    fn from(d: ServiceDone) -> Event {
        Event::Served(d)
    }
}

/// Why a transfer is in flight; consulted when it completes.
#[derive(Debug, Clone)]
pub enum TransferPurpose {
    /// Round-robin RAW replication to a tier-1 center.
    RawReplica { dest: CenterId },
    /// One hop of a fan-out delivery tree.
    FanoutCopy { group: u64, node: CenterId },
    /// Staged input for a job.
    Staging { job: JobId },
    /// Detector-analysis gather fetch.
    AnalysisFetch { run: usize },
    /// Cluster slave fetching a dataset file from a data server.
    ProofFetch { slave: usize, file: FileId },
}

/// Why a server read was queued; consulted when the service slot completes.
#[derive(Debug, Clone)]
pub enum ServicePurpose {
    Staging { job: JobId },
    Analysis { run: usize },
    Proof { slave: usize, file: FileId },
}

/// Who owns a CPU claim that just drained.
#[derive(Debug, Clone, Copy)]
pub enum ClaimOwner {
    Job(JobId),
    ProofSlave(usize),
}

#[derive(Debug, Clone)]
pub enum PendingTransfer {
    Purpose(TransferPurpose),
}

/// One seeded generator, split into per-activity substreams so toggling one
/// activity leaves the others' draws untouched.
pub struct RngStreams {
    pub raw_sizes: Pcg64,
    pub dst_sizes: Pcg64,
    pub proof_locality: Pcg64,
    pub proof_think: Pcg64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

impl RngStreams {
    pub fn new(seed: u64) -> RngStreams {
        let lo = splitmix64(seed) as u128;
        let hi = splitmix64(seed.wrapping_add(0xa5a5_a5a5)) as u128;
        let state = (hi << 64) | lo;
        RngStreams {
            raw_sizes: Pcg64::new(state, 1),
            dst_sizes: Pcg64::new(state, 2),
            proof_locality: Pcg64::new(state, 3),
            proof_think: Pcg64::new(state, 4),
        }
    }
}

/// Truncated-normal file sizes: mean `mean` bytes, standard deviation
/// `relative_sd * mean`, clipped to mean ± 3 sigma and at least one byte.
#[derive(Debug, Clone, Copy)]
pub struct SizeDistribution {
    pub mean: f64,
    pub relative_sd: f64,
}

impl SizeDistribution {
    pub fn new(mean: f64, relative_sd: f64) -> SizeDistribution {
        assert!(mean > 0.0);
        assert!(relative_sd >= 0.0);
        SizeDistribution { mean, relative_sd }
    }

    pub fn sample(&self, rng: &mut Pcg64) -> u64 {
        if self.relative_sd == 0.0 {
            return self.mean.round() as u64;
        }
        let sigma = self.relative_sd * self.mean;
        let normal = Normal::new(self.mean, sigma).expect("valid normal");
        let raw: f64 = normal.sample(rng);
        let clipped = raw.clamp((self.mean - 3.0 * sigma).max(1.0), self.mean + 3.0 * sigma);
        clipped.round().max(1.0) as u64
    }
}

/// Exponential draw via inversion; mean is `mean` seconds.
pub fn sample_exponential(rng: &mut Pcg64, mean: f64) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    -mean * u.ln()
}
