//! Scheduler placement rules and farm processor sharing.

use gridsim_core::engine::{Claim, CompletionOutcome, Kernel, ResourceCompletion, SimTime};
use gridsim_core::model::CenterId;
use gridsim_core::scheduling::{JobKind, Scheduler};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

#[derive(Debug, Clone)]
enum Ev {
    Done(ResourceCompletion),
}

impl From<ResourceCompletion> for Ev {
    fn from(c: ResourceCompletion) -> Ev {
        Ev::Done(c)
    }
}

fn three_center_world(cpus: &[u32]) -> (Kernel<Ev>, Scheduler) {
    let mut kernel: Kernel<Ev> = Kernel::new();
    let mut sched = Scheduler::default();
    for (i, &n) in cpus.iter().enumerate() {
        sched.add_farm(&mut kernel, CenterId(i as u32), &format!("C{i}"), n, 1e9, 0.8);
    }
    (kernel, sched)
}

/// Occupy a farm with raw filler claims to reach a given load, bypassing the
/// placement rule entirely.
fn occupy(kernel: &mut Kernel<Ev>, sched: &mut Scheduler, center: CenterId, jobs: usize) {
    for i in 0..jobs {
        let pid = kernel.spawn(format!("filler-{}-{i}", center.0));
        let farm = sched.farm(center);
        kernel
            .resource_join(farm.resource, Claim::new(pid, 1e15, 1.0, Some(farm.per_cpu_ops)))
            .unwrap();
    }
}

#[test]
fn below_threshold_runs_locally() {
    let (mut kernel, mut sched) = three_center_world(&[10, 10, 10]);
    occupy(&mut kernel, &mut sched, CenterId(0), 5); // load 0.5
    let id = sched.submit(&mut kernel, JobKind::Generic, 1e12, vec![], CenterId(0));
    let job = sched.job(id).unwrap();
    assert_eq!(job.placed, CenterId(0));
    assert!(!job.exported);
}

#[test]
fn above_threshold_exports_to_least_loaded() {
    let (mut kernel, mut sched) = three_center_world(&[10, 10, 10]);
    occupy(&mut kernel, &mut sched, CenterId(0), 9); // load 0.9
    occupy(&mut kernel, &mut sched, CenterId(1), 5); // load 0.5
    occupy(&mut kernel, &mut sched, CenterId(2), 3); // load 0.3
    let id = sched.submit(&mut kernel, JobKind::Generic, 1e12, vec![], CenterId(0));
    let job = sched.job(id).unwrap();
    assert_eq!(job.placed, CenterId(2));
    assert!(job.exported);
}

#[test]
fn export_choice_matches_argmin_scan() {
    let mut rng = Pcg64::seed_from_u64(31);
    for _ in 0..30 {
        let centers = rng.gen_range(2..=6usize);
        let cpus: Vec<u32> = (0..centers).map(|_| rng.gen_range(4..20)).collect();
        let (mut kernel, mut sched) = three_center_world(&cpus);
        let mut loads = vec![0.0f64; centers];
        for (i, &n) in cpus.iter().enumerate() {
            let jobs = rng.gen_range(0..(2 * n) as usize);
            occupy(&mut kernel, &mut sched, CenterId(i as u32), jobs);
            loads[i] = jobs as f64 / n as f64;
        }
        // Saturate center 0 so a submit exports.
        let extra = (cpus[0] as usize).saturating_sub((loads[0] * cpus[0] as f64) as usize) + 1;
        occupy(&mut kernel, &mut sched, CenterId(0), extra);
        loads[0] += extra as f64 / cpus[0] as f64;
        if loads[0] <= 0.8 {
            continue;
        }

        let id = sched.submit(&mut kernel, JobKind::Generic, 1e12, vec![], CenterId(0));
        let placed = sched.job(id).unwrap().placed;

        let expected = (1..centers)
            .map(|i| (loads[i], CenterId(i as u32)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .unwrap()
            .1;
        assert_eq!(placed, expected);
    }
}

#[test]
fn export_tie_breaks_by_center_id() {
    let (mut kernel, mut sched) = three_center_world(&[10, 10, 10]);
    occupy(&mut kernel, &mut sched, CenterId(0), 9);
    occupy(&mut kernel, &mut sched, CenterId(1), 4);
    occupy(&mut kernel, &mut sched, CenterId(2), 4);
    let id = sched.submit(&mut kernel, JobKind::Generic, 1e12, vec![], CenterId(0));
    assert_eq!(sched.job(id).unwrap().placed, CenterId(1), "equal loads resolve to lower id");
}

#[test]
fn export_argmin_invariant_under_load_scaling() {
    // Scaling every remote center's job count by the same factor must not
    // change the argmin (same CPU counts, scaled claims).
    let base = [4usize, 8, 2];
    let mut choices = Vec::new();
    for scale in [1usize, 2, 3] {
        let (mut kernel, mut sched) = three_center_world(&[10, 10, 10, 10]);
        occupy(&mut kernel, &mut sched, CenterId(0), 9);
        for (i, &jobs) in base.iter().enumerate() {
            occupy(&mut kernel, &mut sched, CenterId((i + 1) as u32), jobs * scale);
        }
        let id = sched.submit(&mut kernel, JobKind::Generic, 1e12, vec![], CenterId(0));
        choices.push(sched.job(id).unwrap().placed);
    }
    assert_eq!(choices[0], choices[1]);
    assert_eq!(choices[1], choices[2]);
}

#[test]
fn lone_job_takes_work_over_capacity() {
    // 3600 * C operations on an idle farm of aggregate capacity C, claim
    // capped at one CPU: with one CPU the phase lasts exactly one hour.
    let (mut kernel, mut sched) = three_center_world(&[1, 1, 1]);
    let id = sched.submit(&mut kernel, JobKind::Generic, 3600.0 * 1e9, vec![], CenterId(0));
    sched.start_cpu_phase(&mut kernel, id).unwrap();
    let mut finish = None;
    kernel
        .run_until(SimTime::new(1e6), |k, ev| {
            let Ev::Done(c) = ev.payload;
            if let CompletionOutcome::Completed { .. } = k.handle_completion(c)? {
                finish = Some(k.now().seconds());
            }
            Ok(())
        })
        .unwrap();
    assert_eq!(finish, Some(3600.0));
}

#[test]
fn two_equal_jobs_on_one_cpu_each_take_double() {
    let (mut kernel, mut sched) = three_center_world(&[1, 1, 1]);
    let a = sched.submit(&mut kernel, JobKind::Generic, 1800.0 * 1e9, vec![], CenterId(0));
    let b = sched.submit(&mut kernel, JobKind::Generic, 1800.0 * 1e9, vec![], CenterId(0));
    sched.start_cpu_phase(&mut kernel, a).unwrap();
    sched.start_cpu_phase(&mut kernel, b).unwrap();
    let mut finishes = Vec::new();
    kernel
        .run_until(SimTime::new(1e6), |k, ev| {
            let Ev::Done(c) = ev.payload;
            if let CompletionOutcome::Completed { .. } = k.handle_completion(c)? {
                finishes.push(k.now().seconds());
            }
            Ok(())
        })
        .unwrap();
    // Solo each is 1800 s; shared they both take 3600 s.
    assert_eq!(finishes, vec![3600.0, 3600.0]);
}

#[test]
fn farm_caps_each_job_at_one_cpu() {
    // Two jobs on a 4-CPU farm run at full single-CPU speed: no speedup from
    // idle CPUs, no slowdown from each other.
    let (mut kernel, mut sched) = three_center_world(&[4, 1, 1]);
    let a = sched.submit(&mut kernel, JobKind::Generic, 100.0 * 1e9, vec![], CenterId(0));
    let b = sched.submit(&mut kernel, JobKind::Generic, 100.0 * 1e9, vec![], CenterId(0));
    sched.start_cpu_phase(&mut kernel, a).unwrap();
    sched.start_cpu_phase(&mut kernel, b).unwrap();
    let mut finishes = Vec::new();
    kernel
        .run_until(SimTime::new(1e6), |k, ev| {
            let Ev::Done(c) = ev.payload;
            if let CompletionOutcome::Completed { .. } = k.handle_completion(c)? {
                finishes.push(k.now().seconds());
            }
            Ok(())
        })
        .unwrap();
    assert_eq!(finishes, vec![100.0, 100.0]);
}

#[test]
fn cpu_claims_join_in_submit_order() {
    let (mut kernel, mut sched) = three_center_world(&[2, 1, 1]);
    let ids: Vec<_> = (0..6)
        .map(|_| sched.submit(&mut kernel, JobKind::Generic, 1e12, vec![], CenterId(0)))
        .collect();
    for &id in &ids {
        sched.start_cpu_phase(&mut kernel, id).unwrap();
    }
    assert_eq!(sched.start_order[&CenterId(0)], ids);
}
