//! Max-min fair rate allocation by progressive filling.
//!
//! Every unfrozen flow's rate rises in lockstep. A flow freezes when a link
//! on its path saturates or its own ceiling binds; capacity freed by frozen
//! flows keeps filling the rest. The result is work-conserving on every
//! saturated link and independent of flow arrival order.

/// A flow to allocate: the link indices it crosses and an optional rate cap
/// (the window/RTT ceiling for WAN transfers).
#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub links: Vec<usize>,
    pub cap: Option<f64>,
}

/// Compute the max-min fair allocation. `capacities` holds current link
/// capacities in bits/s, indexed by the link indices in each flow.
pub fn allocate_rates(capacities: &[f64], flows: &[FlowSpec]) -> Vec<f64> {
    let mut rates = vec![0.0; flows.len()];
    if flows.is_empty() {
        return rates;
    }
    let mut headroom: Vec<f64> = capacities.to_vec();
    let mut frozen = vec![false; flows.len()];
    let mut sharers = vec![0usize; capacities.len()];
    loop {
        for count in sharers.iter_mut() {
            *count = 0;
        }
        let mut any_active = false;
        for (i, flow) in flows.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            any_active = true;
            for &l in &flow.links {
                sharers[l] += 1;
            }
        }
        if !any_active {
            break;
        }

        let mut delta = f64::INFINITY;
        for (l, &count) in sharers.iter().enumerate() {
            if count > 0 {
                delta = delta.min(headroom[l].max(0.0) / count as f64);
            }
        }
        for (i, flow) in flows.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            if let Some(cap) = flow.cap {
                delta = delta.min((cap - rates[i]).max(0.0));
            }
        }

        if delta > 0.0 {
            for (i, flow) in flows.iter().enumerate() {
                if frozen[i] {
                    continue;
                }
                rates[i] += delta;
                for &l in &flow.links {
                    headroom[l] -= delta;
                }
            }
        }

        let mut froze_any = false;
        for (i, flow) in flows.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            let at_cap = flow
                .cap
                .is_some_and(|cap| rates[i] >= cap - 1e-12 * cap.max(1.0));
            let blocked = flow
                .links
                .iter()
                .any(|&l| headroom[l] <= 1e-12 * capacities[l].max(1.0));
            if at_cap || blocked {
                frozen[i] = true;
                froze_any = true;
            }
        }
        if !froze_any {
            debug_assert!(delta > 0.0, "filling stalled without freezing");
            if delta <= 0.0 {
                break;
            }
        }
    }
    rates
}
