//! Fixed-timestep validation oracle.
//!
//! Re-derives completion times for advertised resource/claim schedules by
//! brute-force integration: every `dt`, rates are recomputed from scratch
//! (per-resource fair share with caps; progressive filling over link paths)
//! and remaining work is advanced by `rate * dt`. Deliberately shares no code
//! with the event-driven engine or the network allocator; it exists to check
//! them.

use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct OracleResource {
    pub id: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OracleClaim {
    pub resource: String,
    pub join: f64,
    pub work: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OracleLink {
    pub id: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OracleTransfer {
    pub links: Vec<String>,
    pub start: f64,
    pub bits: f64,
    #[serde(default)]
    pub cap: Option<f64>,
}

fn default_weight() -> f64 {
    1.0
}

/// A resource/claim schedule to integrate.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct OracleTrace {
    #[serde(default)]
    pub resources: Vec<OracleResource>,
    #[serde(default)]
    pub claims: Vec<OracleClaim>,
    #[serde(default)]
    pub links: Vec<OracleLink>,
    #[serde(default)]
    pub transfers: Vec<OracleTransfer>,
}

impl OracleTrace {
    pub fn parse(text: &str) -> Result<OracleTrace, String> {
        let trace: OracleTrace = toml::from_str(text).map_err(|e| e.to_string())?;
        for claim in &trace.claims {
            if !trace.resources.iter().any(|r| r.id == claim.resource) {
                return Err(format!("claim references unknown resource '{}'", claim.resource));
            }
        }
        for tr in &trace.transfers {
            for link in &tr.links {
                if !trace.links.iter().any(|l| &l.id == link) {
                    return Err(format!("transfer references unknown link '{link}'"));
                }
            }
        }
        Ok(trace)
    }
}

/// Completion times, indexed like the trace inputs. `None` means the item
/// never finished within the integration horizon.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub claim_finish: Vec<Option<f64>>,
    pub transfer_finish: Vec<Option<f64>>,
    pub steps: u64,
}

/// Per-resource progressive filling: raise every active claim's rate in
/// lockstep (weighted) and freeze claims as they hit their caps.
fn resource_rates(capacity: f64, claims: &[(f64, Option<f64>)]) -> Vec<f64> {
    let mut rates = vec![0.0; claims.len()];
    let mut active: Vec<usize> = (0..claims.len()).collect();
    let mut left = capacity;
    while !active.is_empty() && left > 1e-15 {
        let weight_sum: f64 = active.iter().map(|&i| claims[i].0).sum();
        let mut delta = left / weight_sum;
        for &i in &active {
            if let Some(cap) = claims[i].1 {
                let headroom = (cap - rates[i]) / claims[i].0;
                if headroom < delta {
                    delta = headroom;
                }
            }
        }
        if delta <= 0.0 {
            break;
        }
        for &i in &active {
            rates[i] += delta * claims[i].0;
        }
        left -= delta * weight_sum;
        active.retain(|&i| match claims[i].1 {
            Some(cap) => rates[i] < cap - 1e-12 * cap.max(1.0),
            None => true,
        });
    }
    rates
}

/// Progressive filling across link paths: all unfrozen flows rise together;
/// a flow freezes when a link it crosses saturates or its own cap binds.
fn transfer_rates(
    link_capacity: &[f64],
    flows: &[(Vec<usize>, Option<f64>)],
) -> Vec<f64> {
    let mut rates = vec![0.0; flows.len()];
    let mut frozen = vec![false; flows.len()];
    let mut used = vec![0.0; link_capacity.len()];
    loop {
        let active: Vec<usize> = (0..flows.len()).filter(|&i| !frozen[i]).collect();
        if active.is_empty() {
            break;
        }
        let mut counts = vec![0usize; link_capacity.len()];
        for &i in &active {
            for &l in &flows[i].0 {
                counts[l] += 1;
            }
        }
        let mut delta = f64::INFINITY;
        for (l, &cap) in link_capacity.iter().enumerate() {
            if counts[l] > 0 {
                delta = delta.min((cap - used[l]) / counts[l] as f64);
            }
        }
        for &i in &active {
            if let Some(cap) = flows[i].1 {
                delta = delta.min(cap - rates[i]);
            }
        }
        if !delta.is_finite() || delta < 0.0 {
            delta = delta.max(0.0);
        }
        for &i in &active {
            rates[i] += delta;
            for &l in &flows[i].0 {
                used[l] += delta;
            }
        }
        let mut any_frozen = false;
        for &i in &active {
            let capped = flows[i].1.is_some_and(|c| rates[i] >= c - 1e-12 * c.max(1.0));
            let saturated = flows[i]
                .0
                .iter()
                .any(|&l| used[l] >= link_capacity[l] - 1e-12 * link_capacity[l].max(1.0));
            if capped || saturated {
                frozen[i] = true;
                any_frozen = true;
            }
        }
        if !any_frozen {
            // Only possible when every active flow is uncapped on unsaturated
            // links with delta 0, i.e. zero-capacity links: stall them.
            for &i in &active {
                frozen[i] = true;
            }
        }
    }
    rates
}

/// Integrate the trace with timestep `dt`, recomputing allocations each step.
pub fn timestep_oracle(trace: &OracleTrace, dt: f64) -> OracleResult {
    assert!(dt > 0.0, "oracle timestep must be positive");
    let resource_index = |name: &str| trace.resources.iter().position(|r| r.id == name).unwrap();
    let link_index = |name: &str| trace.links.iter().position(|l| l.id == name).unwrap();

    let mut claim_left: Vec<f64> = trace.claims.iter().map(|c| c.work).collect();
    let mut claim_finish: Vec<Option<f64>> = vec![None; trace.claims.len()];
    let mut transfer_left: Vec<f64> = trace.transfers.iter().map(|t| t.bits).collect();
    let mut transfer_finish: Vec<Option<f64>> = vec![None; trace.transfers.len()];

    let claim_resource: Vec<usize> =
        trace.claims.iter().map(|c| resource_index(&c.resource)).collect();
    let transfer_links: Vec<Vec<usize>> = trace
        .transfers
        .iter()
        .map(|t| t.links.iter().map(|l| link_index(l)).collect())
        .collect();
    let link_caps: Vec<f64> = trace.links.iter().map(|l| l.capacity).collect();

    let mut t = 0.0;
    let mut steps = 0u64;
    loop {
        let claims_open = claim_finish.iter().any(|f| f.is_none());
        let transfers_open = transfer_finish.iter().any(|f| f.is_none());
        if !claims_open && !transfers_open {
            break;
        }
        // Bail out if nothing can ever finish (starved items).
        let horizon_exceeded = steps > 500_000_000;
        if horizon_exceeded {
            break;
        }

        for (res_idx, res) in trace.resources.iter().enumerate() {
            let active: Vec<usize> = (0..trace.claims.len())
                .filter(|&i| {
                    claim_resource[i] == res_idx
                        && trace.claims[i].join <= t + 1e-12
                        && claim_finish[i].is_none()
                })
                .collect();
            if active.is_empty() {
                continue;
            }
            let specs: Vec<(f64, Option<f64>)> =
                active.iter().map(|&i| (trace.claims[i].weight, trace.claims[i].cap)).collect();
            let rates = resource_rates(res.capacity, &specs);
            for (k, &i) in active.iter().enumerate() {
                claim_left[i] -= rates[k] * dt;
                if claim_left[i] <= 0.0 {
                    claim_finish[i] = Some(t + dt);
                }
            }
        }

        let active_tr: Vec<usize> = (0..trace.transfers.len())
            .filter(|&i| trace.transfers[i].start <= t + 1e-12 && transfer_finish[i].is_none())
            .collect();
        if !active_tr.is_empty() {
            let flows: Vec<(Vec<usize>, Option<f64>)> = active_tr
                .iter()
                .map(|&i| (transfer_links[i].clone(), trace.transfers[i].cap))
                .collect();
            let rates = transfer_rates(&link_caps, &flows);
            for (k, &i) in active_tr.iter().enumerate() {
                transfer_left[i] -= rates[k] * dt;
                if transfer_left[i] <= 0.0 {
                    transfer_finish[i] = Some(t + dt);
                }
            }
        }

        // Progress check: if nothing is being served and nothing new will
        // arrive, remaining items are starved forever.
        if !has_future_arrivals(trace, t)
            && all_stalled(trace, t, &claim_finish, &transfer_finish, &link_caps)
        {
            break;
        }

        t += dt;
        steps += 1;
    }

    OracleResult { claim_finish, transfer_finish, steps }
}

fn has_future_arrivals(trace: &OracleTrace, t: f64) -> bool {
    trace.claims.iter().any(|c| c.join > t + 1e-12)
        || trace.transfers.iter().any(|tr| tr.start > t + 1e-12)
}

fn all_stalled(
    trace: &OracleTrace,
    t: f64,
    claim_finish: &[Option<f64>],
    transfer_finish: &[Option<f64>],
    link_caps: &[f64],
) -> bool {
    let open_claim_served = trace.claims.iter().enumerate().any(|(i, c)| {
        claim_finish[i].is_none()
            && c.join <= t + 1e-12
            && trace.resources.iter().find(|r| r.id == c.resource).is_some_and(|r| r.capacity > 0.0)
    });
    let open_transfer_served = trace.transfers.iter().enumerate().any(|(i, tr)| {
        transfer_finish[i].is_none()
            && tr.start <= t + 1e-12
            && tr.links.iter().all(|l| {
                let idx = trace.links.iter().position(|x| &x.id == l).unwrap();
                link_caps[idx] > 0.0
            })
    });
    !(open_claim_served || open_transfer_served)
}

/// Brute-force max-min optimality check.
///
/// An allocation passes when it is feasible and no flow could be raised by a
/// small epsilon while staying feasible without lowering some flow of equal
/// or smaller rate. Returns a human-readable violation if one exists.
pub fn check_max_min(
    capacities: &[f64],
    flows: &[(Vec<usize>, Option<f64>)],
    rates: &[f64],
) -> Result<(), String> {
    assert_eq!(flows.len(), rates.len());
    let scale = capacities.iter().cloned().fold(1.0f64, f64::max);
    let tol = 1e-9 * scale;

    let mut used = vec![0.0; capacities.len()];
    for (i, (links, cap)) in flows.iter().enumerate() {
        if rates[i] < -tol {
            return Err(format!("flow {i} has negative rate {}", rates[i]));
        }
        if let Some(c) = cap {
            if rates[i] > c + tol {
                return Err(format!("flow {i} exceeds its cap: {} > {c}", rates[i]));
            }
        }
        for &l in links {
            used[l] += rates[i];
        }
    }
    for (l, &u) in used.iter().enumerate() {
        if u > capacities[l] + tol {
            return Err(format!("link {l} oversubscribed: {u} > {}", capacities[l]));
        }
    }

    let eps = 1e-6 * scale;
    for (i, (links, cap)) in flows.iter().enumerate() {
        if let Some(c) = cap {
            if rates[i] + eps > *c {
                continue; // the flow's own ceiling blocks any raise
            }
        }
        // The raise is blocked if some saturated link on the path has no
        // strictly richer flow to take bandwidth from.
        let mut blocked = false;
        for &l in links {
            if used[l] + eps <= capacities[l] {
                continue; // headroom on this link, it doesn't block
            }
            let has_richer_donor = flows
                .iter()
                .enumerate()
                .any(|(j, (jl, _))| j != i && jl.contains(&l) && rates[j] > rates[i] + eps);
            if !has_richer_donor {
                blocked = true;
                break;
            }
        }
        if !blocked {
            return Err(format!(
                "flow {i} (rate {}) could be raised at the expense of richer flows only",
                rates[i]
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_claim_finishes_at_work_over_capacity() {
        let trace = OracleTrace {
            resources: vec![OracleResource { id: "r".into(), capacity: 10.0 }],
            claims: vec![OracleClaim {
                resource: "r".into(),
                join: 0.0,
                work: 100.0,
                weight: 1.0,
                cap: None,
            }],
            ..Default::default()
        };
        let result = timestep_oracle(&trace, 1e-3);
        let finish = result.claim_finish[0].unwrap();
        assert!((finish - 10.0).abs() <= 1e-3 + 1e-9, "finish={finish}");
    }

    #[test]
    fn two_task_interrupt_trace_matches_hand_arithmetic() {
        // Capacity 10; A joins at t=0 with work 100; B joins at t=4 with
        // work 50. Shared service puts B at 14.0 and A at 15.0.
        let trace = OracleTrace {
            resources: vec![OracleResource { id: "cpu".into(), capacity: 10.0 }],
            claims: vec![
                OracleClaim { resource: "cpu".into(), join: 0.0, work: 100.0, weight: 1.0, cap: None },
                OracleClaim { resource: "cpu".into(), join: 4.0, work: 50.0, weight: 1.0, cap: None },
            ],
            ..Default::default()
        };
        let result = timestep_oracle(&trace, 1e-3);
        let a = result.claim_finish[0].unwrap();
        let b = result.claim_finish[1].unwrap();
        assert!((a - 15.0).abs() <= 0.01, "A finished at {a}");
        assert!((b - 14.0).abs() <= 0.01, "B finished at {b}");
    }

    #[test]
    fn shared_bottleneck_link_splits_evenly() {
        let trace = OracleTrace {
            links: vec![OracleLink { id: "l".into(), capacity: 10.0 }],
            transfers: vec![
                OracleTransfer { links: vec!["l".into()], start: 0.0, bits: 100.0, cap: None },
                OracleTransfer { links: vec!["l".into()], start: 0.0, bits: 100.0, cap: None },
            ],
            ..Default::default()
        };
        let result = timestep_oracle(&trace, 1e-3);
        for finish in &result.transfer_finish {
            let f = finish.unwrap();
            assert!((f - 20.0).abs() <= 2e-3, "finish={f}");
        }
    }
}
