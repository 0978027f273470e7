//! Metric collection: CSV row buffers and exact utilization integrals.
//!
//! Link and CPU usage are integrals of the event trace, not samples: every
//! window boundary forces a resource/network advance, so the emitted averages
//! are exact for the piecewise-constant rates in force.

use crate::engine::{Kernel, ResourceId, SimTime};
use crate::network::{CompletedTransfer, Network};

#[derive(Debug, Clone)]
pub struct TransferRow {
    pub file_id: String,
    pub class: String,
    pub src: String,
    pub dst: String,
    pub size_bytes: u64,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone)]
pub struct JobRow {
    pub job_id: u64,
    pub kind: String,
    pub center: String,
    pub t_submit: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub exported: bool,
}

#[derive(Debug, Clone)]
pub struct ActivityRow {
    pub activity: String,
    pub center: String,
    pub trigger: f64,
    pub completion: f64,
    pub bytes_moved: u64,
}

#[derive(Debug, Clone)]
pub struct LinkRow {
    pub window_end: f64,
    pub link: String,
    pub avg_rate_bps: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone)]
pub struct CpuRow {
    pub window_end: f64,
    pub center: String,
    pub utilization: f64,
}

#[derive(Debug)]
struct TrackedCpu {
    name: String,
    resource: ResourceId,
    capacity: f64,
    prev_busy: f64,
}

/// Collects everything a run emits.
#[derive(Debug, Default)]
pub struct Metrics {
    pub interval: f64,
    pub transfers: Vec<TransferRow>,
    pub jobs: Vec<JobRow>,
    pub activities: Vec<ActivityRow>,
    pub links: Vec<LinkRow>,
    pub cpus: Vec<CpuRow>,
    tracked_cpus: Vec<TrackedCpu>,
    link_prev: Vec<(f64, f64)>,
    last_window_end: f64,
    pub job_failures: u64,
}

impl Metrics {
    pub fn new(interval: f64) -> Metrics {
        Metrics { interval, ..Default::default() }
    }

    pub fn track_cpu(&mut self, name: impl Into<String>, resource: ResourceId, capacity: f64) {
        self.tracked_cpus.push(TrackedCpu {
            name: name.into(),
            resource,
            capacity,
            prev_busy: 0.0,
        });
    }

    pub fn init_links(&mut self, net: &Network) {
        self.link_prev = vec![(0.0, 0.0); net.topology.links.len()];
    }

    pub fn record_transfer(&mut self, net: &Network, done: &CompletedTransfer) {
        self.transfers.push(TransferRow {
            file_id: done.file.to_string(),
            class: done.class.to_string(),
            src: net.topology.node_name(done.src).to_string(),
            dst: net.topology.node_name(done.dst).to_string(),
            size_bytes: done.size_bytes,
            t_start: done.started_at.seconds(),
            t_end: done.finished_at.seconds(),
        });
    }

    /// Close the window ending at `now`, emitting one row per link and per
    /// tracked CPU. The caller must advance network and resources first.
    pub fn flush_window<E: From<crate::engine::ResourceCompletion>>(
        &mut self,
        kernel: &Kernel<E>,
        net: &Network,
        now: f64,
    ) {
        let window = now - self.last_window_end;
        if window <= 0.0 {
            return;
        }
        for (i, link) in net.topology.links.iter().enumerate() {
            let (prev_bits, prev_cap) = self.link_prev[i];
            let bits = link.served_bits - prev_bits;
            let cap_bits = link.capacity_bits - prev_cap;
            self.links.push(LinkRow {
                window_end: now,
                link: link.name.clone(),
                avg_rate_bps: bits / window,
                utilization: if cap_bits > 0.0 { bits / cap_bits } else { 0.0 },
            });
            self.link_prev[i] = (link.served_bits, link.capacity_bits);
        }
        for cpu in &mut self.tracked_cpus {
            let busy = kernel.resource(cpu.resource).busy_integral;
            let used = busy - cpu.prev_busy;
            cpu.prev_busy = busy;
            self.cpus.push(CpuRow {
                window_end: now,
                center: cpu.name.clone(),
                utilization: if cpu.capacity > 0.0 { used / (cpu.capacity * window) } else { 0.0 },
            });
        }
        self.last_window_end = now;
    }

    /// Resources that must be advanced before a flush.
    pub fn tracked_resources(&self) -> Vec<ResourceId> {
        self.tracked_cpus.iter().map(|c| c.resource).collect()
    }

    /// Whole-run average utilization per tracked CPU (post-finalize).
    pub fn cpu_run_average(&self) -> Vec<(String, f64)> {
        let mut sums: Vec<(String, f64, f64)> = self
            .tracked_cpus
            .iter()
            .map(|c| (c.name.clone(), 0.0, 0.0))
            .collect();
        for row in &self.cpus {
            if let Some(entry) = sums.iter_mut().find(|(n, _, _)| *n == row.center) {
                entry.1 += row.utilization;
                entry.2 += 1.0;
            }
        }
        sums.into_iter()
            .map(|(n, sum, count)| (n, if count > 0.0 { sum / count } else { 0.0 }))
            .collect()
    }
}

pub fn fmt_time(t: f64) -> String {
    format!("{t:.6}")
}

/// Render the five CSV artifacts.
pub fn transfers_csv(rows: &[TransferRow]) -> String {
    let mut out = String::from("file_id,class,src,dst,size_bytes,t_start_s,t_end_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.file_id,
            r.class,
            r.src,
            r.dst,
            r.size_bytes,
            fmt_time(r.t_start),
            fmt_time(r.t_end)
        ));
    }
    out
}

pub fn links_csv(rows: &[LinkRow]) -> String {
    let mut out = String::from("t_window_end_s,link_id,avg_rate_bps,utilization\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.3},{:.6}\n",
            fmt_time(r.window_end),
            r.link,
            r.avg_rate_bps,
            r.utilization
        ));
    }
    out
}

pub fn cpu_csv(rows: &[CpuRow]) -> String {
    let mut out = String::from("t_window_end_s,center_id,cpu_utilization\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.6}\n", fmt_time(r.window_end), r.center, r.utilization));
    }
    out
}

pub fn jobs_csv(rows: &[JobRow]) -> String {
    let mut out = String::from("job_id,type,center,t_submit_s,t_start_s,t_end_s,exported\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.job_id,
            r.kind,
            r.center,
            fmt_time(r.t_submit),
            fmt_time(r.t_start),
            fmt_time(r.t_end),
            r.exported
        ));
    }
    out
}

pub fn activities_csv(rows: &[ActivityRow]) -> String {
    let mut out = String::from("activity,center,trigger_time_s,completion_time_s,bytes_moved\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.activity,
            r.center,
            fmt_time(r.trigger),
            fmt_time(r.completion),
            r.bytes_moved
        ));
    }
    out
}

/// Needed by tests and the summary: advance-and-flush helper used by the
/// driver at every metrics boundary.
pub fn force_advance<E: From<crate::engine::ResourceCompletion>>(
    kernel: &mut Kernel<E>,
    net: &mut Network,
    resources: &[ResourceId],
    now: SimTime,
) {
    net.advance(now);
    for &rid in resources {
        kernel.resource_update(rid, now);
    }
}
