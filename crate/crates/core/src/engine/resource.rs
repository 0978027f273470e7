use super::process::ProcessId;
use super::time::{SimTime, EPSILON, REL_EPSILON};

/// Handle to a shared resource registered with the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourceId(pub u32);

/// One task's demand on a shared resource.
#[derive(Debug, Clone)]
pub struct Claim {
    pub owner: ProcessId,
    /// Work still to be served, in the resource's work-units.
    pub remaining: f64,
    /// Work demanded when the claim joined; completion tolerances scale with it.
    pub initial: f64,
    /// Priority share. Equal-share is weight 1 for everyone.
    pub weight: f64,
    /// Optional ceiling on the allocated rate (work-units/s).
    pub cap: Option<f64>,
    /// Current allocation, recomputed on every membership or capacity change.
    pub rate: f64,
    /// Work served so far, integrated across allocation epochs.
    pub served: f64,
    /// Projected completion under the current allocation; `None` while starved.
    pub projected_finish: Option<SimTime>,
}

impl Claim {
    pub fn new(owner: ProcessId, work: f64, weight: f64, cap: Option<f64>) -> Claim {
        assert!(work > 0.0, "claim work must be positive");
        assert!(weight > 0.0, "claim weight must be positive");
        if let Some(c) = cap {
            assert!(c > 0.0, "claim cap must be positive");
        }
        Claim {
            owner,
            remaining: work,
            initial: work,
            weight,
            cap,
            rate: 0.0,
            served: 0.0,
            projected_finish: None,
        }
    }

    /// A claim counts as drained once float residue is all that is left.
    pub fn is_drained(&self) -> bool {
        self.remaining <= EPSILON + REL_EPSILON * self.initial
    }
}

/// A capacity that divides among concurrent claims: a CPU farm, a single
/// station, or any other processor-shared unit.
///
/// Rates follow weighted fair sharing with per-claim ceilings: capacity left
/// unused by capped claims is redistributed among the uncapped ones. Every
/// membership or capacity change bumps `epoch`, which lazily invalidates
/// completion events scheduled under the old allocation.
#[derive(Debug)]
pub struct SharedResource {
    pub id: ResourceId,
    pub name: String,
    pub capacity: f64,
    pub claims: Vec<Claim>,
    pub last_update: SimTime,
    pub epoch: u64,
    /// Integral of allocated rate over time, for utilization metrics.
    pub busy_integral: f64,
    /// Times a claim's remaining work was clamped from below zero.
    pub clamp_events: u64,
}

impl SharedResource {
    pub fn new(id: ResourceId, name: impl Into<String>, capacity: f64) -> SharedResource {
        assert!(capacity >= 0.0, "resource capacity must be non-negative");
        SharedResource {
            id,
            name: name.into(),
            capacity,
            claims: Vec::new(),
            last_update: SimTime::ZERO,
            epoch: 0,
            busy_integral: 0.0,
            clamp_events: 0,
        }
    }

    /// Advance claim bookkeeping to `now`: each claim is served `rate * dt`.
    pub fn advance(&mut self, now: SimTime) {
        debug_assert!(now >= self.last_update, "resource update going backwards");
        let dt = now - self.last_update;
        if dt > 0.0 {
            for claim in &mut self.claims {
                if claim.rate > 0.0 {
                    let delta = claim.rate * dt;
                    claim.remaining -= delta;
                    claim.served += delta;
                    self.busy_integral += delta;
                    if claim.remaining < 0.0 {
                        if claim.remaining < -(EPSILON + REL_EPSILON * claim.initial) {
                            self.clamp_events += 1;
                        }
                        claim.remaining = 0.0;
                    }
                }
            }
        }
        self.last_update = now;
    }

    /// Recompute the fair-share allocation and projected finish times.
    ///
    /// Water-filling within the resource: start from the weighted share,
    /// freeze claims whose cap is below their share, and redistribute the
    /// freed capacity among the rest.
    pub fn recompute_rates(&mut self, now: SimTime) {
        let mut unassigned: Vec<usize> = (0..self.claims.len()).collect();
        let mut capacity_left = self.capacity;
        while !unassigned.is_empty() {
            let weight_sum: f64 = unassigned.iter().map(|&i| self.claims[i].weight).sum();
            let mut newly_capped = Vec::new();
            for &i in &unassigned {
                let share = capacity_left * self.claims[i].weight / weight_sum;
                if let Some(cap) = self.claims[i].cap {
                    if cap < share {
                        newly_capped.push(i);
                    }
                }
            }
            if newly_capped.is_empty() {
                for &i in &unassigned {
                    let share = capacity_left * self.claims[i].weight / weight_sum;
                    self.claims[i].rate = share;
                }
                break;
            }
            for &i in &newly_capped {
                let cap = self.claims[i].cap.unwrap();
                self.claims[i].rate = cap;
                capacity_left -= cap;
            }
            unassigned.retain(|i| !newly_capped.contains(i));
        }
        for claim in &mut self.claims {
            claim.projected_finish = if claim.rate > 0.0 {
                Some(now + claim.remaining / claim.rate)
            } else {
                None
            };
        }
    }

    pub fn claim_of(&self, owner: ProcessId) -> Option<&Claim> {
        self.claims.iter().find(|c| c.owner == owner)
    }

    pub fn position_of(&self, owner: ProcessId) -> Option<usize> {
        self.claims.iter().position(|c| c.owner == owner)
    }

    pub fn is_idle(&self) -> bool {
        self.claims.is_empty()
    }

    /// Instantaneous utilization in [0, 1]; zero-capacity resources count as busy.
    pub fn load(&self) -> f64 {
        if self.capacity <= 0.0 {
            return if self.claims.is_empty() { 0.0 } else { f64::INFINITY };
        }
        self.claims.iter().map(|c| c.rate).sum::<f64>() / self.capacity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resource(capacity: f64) -> SharedResource {
        SharedResource::new(ResourceId(0), "cpu", capacity)
    }

    #[test]
    fn advance_serves_rate_times_dt() {
        let mut r = resource(10.0);
        r.claims.push(Claim::new(ProcessId(0), 100.0, 1.0, None));
        r.recompute_rates(SimTime::ZERO);
        assert_eq!(r.claims[0].rate, 10.0);
        r.advance(SimTime::new(3.0));
        assert_eq!(r.claims[0].remaining, 100.0 - 30.0);
    }

    #[test]
    fn advance_zero_elapsed_is_identity() {
        let mut r = resource(10.0);
        r.claims.push(Claim::new(ProcessId(0), 100.0, 1.0, None));
        r.recompute_rates(SimTime::ZERO);
        r.advance(SimTime::ZERO);
        assert_eq!(r.claims[0].remaining, 100.0);
    }

    #[test]
    fn equal_claims_share_symmetrically() {
        let mut r = resource(10.0);
        r.claims.push(Claim::new(ProcessId(0), 100.0, 1.0, None));
        r.claims.push(Claim::new(ProcessId(1), 100.0, 1.0, None));
        r.recompute_rates(SimTime::ZERO);
        assert_eq!(r.claims[0].rate, 5.0);
        assert_eq!(r.claims[1].rate, 5.0);
        r.advance(SimTime::new(2.0));
        assert_eq!(r.claims[0].remaining, 90.0);
        assert_eq!(r.claims[1].remaining, 90.0);
    }

    #[test]
    fn caps_redistribute_to_uncapped() {
        let mut r = resource(10.0);
        r.claims.push(Claim::new(ProcessId(0), 100.0, 1.0, Some(2.0)));
        r.claims.push(Claim::new(ProcessId(1), 100.0, 1.0, None));
        r.recompute_rates(SimTime::ZERO);
        assert_eq!(r.claims[0].rate, 2.0);
        assert_eq!(r.claims[1].rate, 8.0);
    }

    #[test]
    fn weights_divide_proportionally() {
        let mut r = resource(9.0);
        r.claims.push(Claim::new(ProcessId(0), 100.0, 2.0, None));
        r.claims.push(Claim::new(ProcessId(1), 100.0, 1.0, None));
        r.recompute_rates(SimTime::ZERO);
        assert_eq!(r.claims[0].rate, 6.0);
        assert_eq!(r.claims[1].rate, 3.0);
    }

    #[test]
    fn zero_capacity_starves_claims() {
        let mut r = resource(0.0);
        r.claims.push(Claim::new(ProcessId(0), 100.0, 1.0, None));
        r.recompute_rates(SimTime::ZERO);
        assert_eq!(r.claims[0].rate, 0.0);
        assert!(r.claims[0].projected_finish.is_none());
    }
}
