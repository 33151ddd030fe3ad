//! Fuzz checks of the exact solver: oracle equivalence on tiny instances,
//! checker/model self-consistency, and optimality against random feasible
//! schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtsched_core::offline::gen::random_tiny_mixed;
use rtsched_core::offline::solve::Structure;
use rtsched_core::offline::{
    build_model, check_feasible, enumerate_exhaustive, eval_rows, evaluate_structure,
    map_schedule_to_vars, solve_exact, OfflineInstance, OfflineSchedule, SolveOutcome,
};
use rtsched_core::workload::JobKind;

fn tiny_instance(seed: u64) -> OfflineInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_jobs = rng.gen_range(1..=3);
    let blocks = rng.gen_range(1..=2);
    let t = rng.gen_range(1..=3);
    random_tiny_mixed(num_jobs, blocks, t, seed)
}

#[test]
fn solver_matches_exhaustive_enumeration() {
    let mut solved = 0;
    let mut infeasible = 0;
    for seed in 0..60u64 {
        let inst = tiny_instance(seed);
        let brute = enumerate_exhaustive(&inst);
        let out = solve_exact(&inst, None, 1);
        match (brute, out) {
            (Some((_, b)), SolveOutcome::Optimal { objective, .. }) => {
                assert!(
                    (b - objective).abs() < 1e-9,
                    "seed {seed}: brute {b} vs solver {objective}"
                );
                solved += 1;
            }
            (None, SolveOutcome::Infeasible) => infeasible += 1,
            (b, s) => panic!("seed {seed}: mismatch {:?} vs {:?}", b.map(|x| x.1), s.objective()),
        }
    }
    assert!(solved >= 30, "solved only {solved} of 60");
    println!("oracle fuzz: {solved} solved, {infeasible} infeasible");
}

#[test]
fn solver_schedules_pass_checker_and_model() {
    let mut checked = 0;
    for seed in 100..130u64 {
        let inst = tiny_instance(seed);
        let out = solve_exact(&inst, None, 1);
        let Some(sched) = out.schedule() else { continue };
        let violations = check_feasible(&inst, sched);
        assert!(violations.is_empty(), "seed {seed}: {violations:?}");
        let model = build_model(&inst);
        let vals = map_schedule_to_vars(&inst, sched, &model);
        let bad = eval_rows(&model, &vals, 1e-6);
        assert!(bad.is_empty(), "seed {seed}: rows {bad:?}");
        checked += 1;
    }
    assert!(checked >= 15);
}

/// Random feasible schedule: a random discrete structure evaluated through
/// the leaf rule on an instance whose submits were delayed, reinterpreted
/// against the original instance. Anything the checker accepts must not
/// beat the solver.
fn random_feasible(inst: &OfflineInstance, seed: u64) -> Option<(OfflineSchedule, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.jobs.len();
    let mut delayed = inst.clone();
    for j in delayed.jobs.iter_mut() {
        j.submit_time += (rng.gen_range(0.0..900.0f64) / 60.0).round() * 60.0;
    }
    let placement: Vec<u32> = (0..n)
        .map(|j| {
            let ps = inst.placements(j);
            ps[rng.gen_range(0..ps.len())].placement_index
        })
        .collect();
    let preempted: Vec<bool> = inst
        .jobs
        .iter()
        .map(|j| j.kind == JobKind::Batch && rng.gen_bool(0.3))
        .collect();
    let mut pending0: Vec<usize> = (0..n).collect();
    let mut pending1: Vec<usize> = Vec::new();
    let mut order = Vec::new();
    while !pending0.is_empty() || !pending1.is_empty() {
        let take_second = !pending1.is_empty() && (pending0.is_empty() || rng.gen_bool(0.5));
        if take_second {
            let i = rng.gen_range(0..pending1.len());
            order.push((pending1.remove(i), 1u8));
        } else {
            let i = rng.gen_range(0..pending0.len());
            let j = pending0.remove(i);
            order.push((j, 0u8));
            if preempted[j] {
                pending1.push(j);
            }
        }
    }
    let st = Structure {
        placement,
        preempted,
        order,
    };
    let (sched, _) = evaluate_structure(&delayed, &st)?;
    if !check_feasible(inst, &sched).is_empty() {
        return None;
    }
    let obj = sched.mean_bj_sd(inst);
    Some((sched, obj))
}

#[test]
fn solver_is_optimal_against_random_feasible_schedules() {
    let mut comparisons = 0;
    for seed in 200..240u64 {
        let inst = tiny_instance(seed);
        let out = solve_exact(&inst, None, 1);
        let Some(best) = out.objective() else {
            // solver says infeasible: no random schedule may be accepted
            for k in 0..20 {
                assert!(
                    random_feasible(&inst, seed * 100 + k).is_none(),
                    "seed {seed}: checker accepted a schedule the solver missed"
                );
            }
            continue;
        };
        for k in 0..20 {
            if let Some((_, obj)) = random_feasible(&inst, seed * 100 + k) {
                assert!(
                    best <= obj + 1e-9,
                    "seed {seed}/{k}: solver {best} worse than random {obj}"
                );
                comparisons += 1;
            }
        }
    }
    assert!(comparisons >= 100, "only {comparisons} comparisons");
    println!("optimality fuzz: {comparisons} feasible comparisons");
}

#[test]
fn worker_count_invariance_fuzz() {
    for seed in 300..312u64 {
        let inst = tiny_instance(seed);
        let s1 = solve_exact(&inst, None, 1);
        let s3 = solve_exact(&inst, None, 3);
        assert_eq!(s1.objective(), s3.objective(), "seed {seed}");
        match (s1.schedule(), s3.schedule()) {
            (Some(a), Some(b)) => assert_eq!(
                serde_json::to_string(a).unwrap(),
                serde_json::to_string(b).unwrap(),
                "seed {seed}"
            ),
            (None, None) => {}
            _ => panic!("seed {seed}: feasibility mismatch"),
        }
    }
}
