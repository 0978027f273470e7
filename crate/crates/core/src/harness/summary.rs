//! Per-run summary: transfer-time statistics by class and destination, the
//! all-centers averages, activity latencies, and per-link bandwidth.

use std::collections::BTreeMap;

use crate::harness::metrics::{ActivityRow, LinkRow, Metrics, TransferRow};

#[derive(Debug, Clone, PartialEq)]
pub struct TransferStats {
    pub count: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Summary {
    /// (class, destination) -> stats over completed transfers.
    pub per_destination: BTreeMap<(String, String), TransferStats>,
    /// class -> mean transfer time over every destination ("all Series").
    pub all_series: BTreeMap<String, f64>,
    /// (activity, center, trigger) -> latency seconds.
    pub activity_latency: Vec<(String, String, f64, f64)>,
    /// link -> (average used bandwidth bits/s, average utilization).
    pub link_bandwidth: BTreeMap<String, (f64, f64)>,
    pub notes: Vec<String>,
}

pub fn summarize_rows(
    transfers: &[TransferRow],
    activities: &[ActivityRow],
    links: &[LinkRow],
) -> Summary {
    let mut summary = Summary::default();

    let mut acc: BTreeMap<(String, String), (u64, f64, f64, f64)> = BTreeMap::new();
    let mut by_class: BTreeMap<String, (u64, f64)> = BTreeMap::new();
    for row in transfers {
        let duration = row.t_end - row.t_start;
        let entry = acc
            .entry((row.class.clone(), row.dst.clone()))
            .or_insert((0, 0.0, f64::INFINITY, f64::NEG_INFINITY));
        entry.0 += 1;
        entry.1 += duration;
        entry.2 = entry.2.min(duration);
        entry.3 = entry.3.max(duration);
        let class_entry = by_class.entry(row.class.clone()).or_insert((0, 0.0));
        class_entry.0 += 1;
        class_entry.1 += duration;
    }
    for ((class, dst), (count, sum, min, max)) in acc {
        summary.per_destination.insert(
            (class, dst),
            TransferStats { count, mean: sum / count as f64, min, max },
        );
    }
    for (class, (count, sum)) in by_class {
        summary.all_series.insert(class, sum / count as f64);
    }
    if summary.all_series.is_empty() {
        summary.notes.push("no completed transfers".to_string());
    }
    if !summary.all_series.contains_key("DST") {
        summary.notes.push("no DST transfers completed".to_string());
    }

    for row in activities {
        summary.activity_latency.push((
            row.activity.clone(),
            row.center.clone(),
            row.trigger,
            row.completion - row.trigger,
        ));
    }

    let mut link_acc: BTreeMap<String, (f64, f64, u64)> = BTreeMap::new();
    for row in links {
        let entry = link_acc.entry(row.link.clone()).or_insert((0.0, 0.0, 0));
        entry.0 += row.avg_rate_bps;
        entry.1 += row.utilization;
        entry.2 += 1;
    }
    for (link, (rate_sum, util_sum, count)) in link_acc {
        summary
            .link_bandwidth
            .insert(link, (rate_sum / count as f64, util_sum / count as f64));
    }
    summary
}

pub fn summarize(metrics: &Metrics) -> Summary {
    summarize_rows(&metrics.transfers, &metrics.activities, &metrics.links)
}

pub fn render(summary: &Summary, diagnostics: &[(String, String)]) -> String {
    let mut out = String::new();
    out.push_str("== transfer times by class and destination ==\n");
    out.push_str("class,dst,count,mean_s,min_s,max_s\n");
    for ((class, dst), stats) in &summary.per_destination {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6}\n",
            class, dst, stats.count, stats.mean, stats.min, stats.max
        ));
    }
    out.push_str("\n== all-series transfer time averages ==\n");
    for (class, mean) in &summary.all_series {
        out.push_str(&format!("{class},{mean:.6}\n"));
    }
    out.push_str("\n== activity completion latency ==\n");
    out.push_str("activity,center,trigger_s,latency_s\n");
    for (activity, center, trigger, latency) in &summary.activity_latency {
        out.push_str(&format!("{activity},{center},{trigger:.6},{latency:.6}\n"));
    }
    out.push_str("\n== link averages over the run ==\n");
    out.push_str("link,avg_rate_bps,avg_utilization\n");
    for (link, (rate, util)) in &summary.link_bandwidth {
        out.push_str(&format!("{link},{rate:.3},{util:.6}\n"));
    }
    if !summary.notes.is_empty() {
        out.push_str("\n== notes ==\n");
        for note in &summary.notes {
            out.push_str(note);
            out.push('\n');
        }
    }
    if !diagnostics.is_empty() {
        out.push_str("\n== diagnostics ==\n");
        for (key, value) in diagnostics {
            out.push_str(&format!("{key}: {value}\n"));
        }
    }
    out
}
