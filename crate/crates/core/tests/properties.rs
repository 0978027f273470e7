//! Property tests over the fair-share and allocation invariants.

use gridsim_core::engine::{Claim, CompletionOutcome, Kernel, ProcessId, ResourceCompletion, SimTime};
use gridsim_core::network::{allocate_rates, FlowSpec};

use proptest::prelude::*;

#[derive(Debug, Clone)]
#[allow(dead_code)]
enum Ev {
    Join(usize),
    Done(ResourceCompletion),
}

impl From<ResourceCompletion> for Ev {
    fn from(c: ResourceCompletion) -> Ev {
        Ev::Done(c)
    }
}

fn claim_strategy() -> impl Strategy<Value = (f64, f64, f64, Option<f64>)> {
    (
        0.0f64..20.0,                       // join time
        10.0f64..500.0,                     // work
        prop_oneof![Just(1.0f64), 0.5f64..4.0], // weight
        prop_oneof![Just(None), (0.5f64..8.0).prop_map(Some)], // cap
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every claim that joins a shared resource eventually drains, having
    /// been served exactly the work it claimed (1e-6 relative), and the sum
    /// of rates never exceeds capacity.
    #[test]
    fn shared_resource_conserves_work(
        capacity in 1.0f64..50.0,
        joins in prop::collection::vec(claim_strategy(), 1..20),
    ) {
        let mut kernel: Kernel<Ev> = Kernel::new();
        let rid = kernel.add_resource("cpu", capacity);
        let pids: Vec<ProcessId> =
            (0..joins.len()).map(|i| kernel.spawn(format!("p{i}"))).collect();
        for (i, &(join, _, _, _)) in joins.iter().enumerate() {
            kernel.schedule(SimTime::new(join), None, Ev::Join(i)).unwrap();
        }
        let joins_copy = joins.clone();
        let pids_copy = pids.clone();
        let mut served: Vec<(f64, f64)> = Vec::new();
        let mut max_total_rate: f64 = 0.0;
        kernel
            .run_until(SimTime::new(1e9), |k, ev| {
                match ev.payload {
                    Ev::Join(i) => {
                        let (_, work, weight, cap) = joins_copy[i];
                        k.resource_join(rid, Claim::new(pids_copy[i], work, weight, cap))?;
                        let total: f64 = k.resource(rid).claims.iter().map(|c| c.rate).sum();
                        max_total_rate = max_total_rate.max(total);
                    }
                    Ev::Done(c) => {
                        if let CompletionOutcome::Completed { claim, .. } = k.handle_completion(c)? {
                            served.push((claim.served, claim.initial));
                        }
                    }
                }
                Ok(())
            })
            .unwrap();
        prop_assert!(max_total_rate <= capacity * (1.0 + 1e-12), "rates exceeded capacity");
        for (got, want) in &served {
            prop_assert!((got - want).abs() <= 1e-6 * want, "served {got} of {want}");
        }
        prop_assert_eq!(served.len(), joins.len());
    }

    /// Max-min allocation is feasible, work-conserving on saturated links,
    /// and independent of flow order.
    #[test]
    fn allocation_feasible_and_order_free(
        capacities in prop::collection::vec(0.5f64..100.0, 1..6),
        raw_flows in prop::collection::vec(
            (prop::collection::vec(any::<prop::sample::Index>(), 1..4), prop_oneof![Just(None), (0.1f64..40.0).prop_map(Some)]),
            1..8,
        ),
        seed in any::<u64>(),
    ) {
        let n_links = capacities.len();
        let flows: Vec<FlowSpec> = raw_flows
            .iter()
            .map(|(idx, cap)| {
                let mut links: Vec<usize> = idx.iter().map(|i| i.index(n_links)).collect();
                links.sort_unstable();
                links.dedup();
                FlowSpec { links, cap: *cap }
            })
            .collect();
        let rates = allocate_rates(&capacities, &flows);

        // Feasibility per link and per cap.
        let mut used = vec![0.0; n_links];
        for (flow, &rate) in flows.iter().zip(&rates) {
            prop_assert!(rate >= 0.0);
            if let Some(cap) = flow.cap {
                prop_assert!(rate <= cap * (1.0 + 1e-9));
            }
            for &l in &flow.links {
                used[l] += rate;
            }
        }
        for (l, &u) in used.iter().enumerate() {
            prop_assert!(u <= capacities[l] * (1.0 + 1e-9), "link {l} oversubscribed");
        }
        // Work conservation: every flow is either capped or crosses a
        // saturated link.
        for (flow, &rate) in flows.iter().zip(&rates) {
            let capped = flow.cap.is_some_and(|c| rate >= c * (1.0 - 1e-9));
            let saturated = flow
                .links
                .iter()
                .any(|&l| used[l] >= capacities[l] * (1.0 - 1e-9));
            prop_assert!(capped || saturated, "flow neither capped nor blocked");
        }

        // Order independence under a seeded shuffle.
        let mut order: Vec<usize> = (0..flows.len()).collect();
        let mut state = seed | 1;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            order.swap(i, j);
        }
        let shuffled: Vec<FlowSpec> = order.iter().map(|&i| flows[i].clone()).collect();
        let rates_shuffled = allocate_rates(&capacities, &shuffled);
        for (pos, &orig) in order.iter().enumerate() {
            prop_assert!((rates_shuffled[pos] - rates[orig]).abs() <= 1e-9 * rates[orig].max(1.0));
        }
    }

    /// Dequeue order is exactly (time, sequence).
    #[test]
    fn event_order_is_total_and_stable(times in prop::collection::vec(0.0f64..1e5, 1..200)) {
        let mut kernel: Kernel<Ev> = Kernel::new();
        for &t in &times {
            kernel.schedule(SimTime::new(t), None, Ev::Join(0)).unwrap();
        }
        let mut expected: Vec<(f64, u64)> =
            times.iter().enumerate().map(|(i, &t)| (t, i as u64)).collect();
        expected.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut seen = Vec::new();
        while let gridsim_core::engine::Step::Event(ev) =
            kernel.next_before(SimTime::new(2e5)).unwrap()
        {
            seen.push((ev.time.seconds(), ev.seq));
        }
        prop_assert_eq!(seen, expected);
    }
}
