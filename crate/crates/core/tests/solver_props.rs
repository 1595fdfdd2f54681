mod common;

use coin_placer::cost_model::{feasible, system_cost, Assignment, Network, QueuingParams};
use coin_placer::solver::{
    branch_and_bound, branching_order, brute_force, completion_lower_bound, SolveStatus, SolverConfig,
};
use coin_placer::topology::SplitMode;
use coin_placer::workload::{generate_run, RunSpec, TaskRequest};
use common::random_instance;
use proptest::prelude::*;

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Cheapest feasible completion of `prefix` (labels in branching order).
fn best_completion(run: &[TaskRequest], net: &Network, q: &QueuingParams, prefix: &[usize]) -> Option<f64> {
    let order = branching_order(run);
    let m = net.catalog.len();
    let free = run.len() - prefix.len();
    let mut best: Option<f64> = None;
    for code in 0..m.pow(free as u32) {
        let mut labels = vec![0; run.len()];
        for (i, &l) in prefix.iter().enumerate() {
            labels[order[i]] = l;
        }
        let mut c = code;
        for &k in &order[prefix.len()..] {
            labels[k] = c % m;
            c /= m;
        }
        let a = Assignment::from_labels(&labels, &net.catalog);
        if feasible(run, &a, net, q).is_feasible() {
            let cost = system_cost(run, &a, &net.hops).unwrap();
            best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn branch_and_bound_matches_brute_force(seed in any::<u64>()) {
        let (net, q, run) = random_instance(seed, 6);
        let cfg = SolverConfig::default();
        let exact = brute_force(&run, &net, &q, &cfg).unwrap();
        let bb = branch_and_bound(&run, &net, &q, &cfg);
        prop_assert_eq!(exact.status, bb.status);
        if exact.optimal {
            prop_assert!(rel_eq(exact.cost, bb.cost), "brute {} bb {}", exact.cost, bb.cost);
            prop_assert!(feasible(&run, &bb.assignment, &net, &q).is_feasible());
            prop_assert_eq!(bb.cost, system_cost(&run, &bb.assignment, &net.hops).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lower_bound_is_admissible(seed in any::<u64>(), prefix_seed in any::<u64>()) {
        let (net, q, run) = random_instance(seed, 5);
        let m = net.catalog.len();
        prop_assume!(m > 0);
        let depth = (prefix_seed as usize) % (run.len() + 1);
        let prefix: Vec<usize> = (0..depth).map(|i| ((prefix_seed >> (8 * i)) as usize) % m).collect();
        let lb = completion_lower_bound(&run, &net, &q, &prefix);
        let order = branching_order(&run);
        let fixed: f64 = prefix
            .iter()
            .enumerate()
            .map(|(i, &l)| coin_placer::cost_model::network_cost(&run[order[i]], &net.catalog.decisions[l], &net.hops).unwrap())
            .sum();
        if let Some(best) = best_completion(&run, &net, &q, &prefix) {
            prop_assert!(fixed + lb <= best + 1e-9 * best.max(1.0), "bound {} + {} > optimum {}", fixed, lb, best);
        }
    }

    #[test]
    fn adding_a_task_never_lowers_cost(seed in any::<u64>()) {
        // With an uncontended MEC the delay-order rule never binds, so any
        // feasible placement stays feasible when a task is removed.
        let (net, q, run) = random_instance(seed, 6);
        prop_assume!(!run.is_empty());
        let net = Network::new(net.topology.clone(), SplitMode::NoSplit).unwrap();
        let cfg = SolverConfig::default();
        let full = branch_and_bound(&run, &net, &q, &cfg);
        let less = branch_and_bound(&run[..run.len() - 1], &net, &q, &cfg);
        if full.optimal {
            prop_assert!(less.optimal);
            prop_assert!(full.cost >= less.cost);
        }
    }

    #[test]
    fn solving_is_deterministic(seed in any::<u64>()) {
        let (net, q, run) = random_instance(seed, 6);
        let cfg = SolverConfig::default();
        let mut a = branch_and_bound(&run, &net, &q, &cfg);
        let mut b = branch_and_bound(&run, &net, &q, &cfg);
        a.stats.wall_time_s = 0.0;
        b.stats.wall_time_s = 0.0;
        prop_assert_eq!(a, b);
    }
}

#[test]
fn default_runs_are_solved_to_optimality() {
    let q = QueuingParams::default();
    let cfg = SolverConfig::default();
    for net in [Network::default_split(), Network::default_nosplit()] {
        for seed in 0..5 {
            let run = generate_run(&RunSpec::default().with_seed(seed), &net.topology.access_points()).unwrap();
            let s = branch_and_bound(&run, &net, &q, &cfg);
            assert_eq!(s.status, SolveStatus::Optimal);
            assert!(feasible(&run, &s.assignment, &net, &q).is_feasible());
        }
    }
}
