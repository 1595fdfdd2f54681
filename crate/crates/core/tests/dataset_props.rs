use coin_placer::cost_model::{Network, QueuingParams};
use coin_placer::dataset::{
    build_graph, generate_dataset, kfold_split, run_features, Dataset, DatasetConfig, EdgeRule, FeatureSpace,
    FoldPlan, Standardizer,
};
use coin_placer::models::dense::Matrix;
use coin_placer::solver::SolverConfig;
use coin_placer::topology::SplitMode;
use coin_placer::workload::{generate_run, RunSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn folds_partition_the_indices(n in 1usize..300, k in 1usize..12, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let plan = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(plan.folds.len(), k);
        let mut all: Vec<usize> = plan.folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for t in 0..k {
            let train = plan.train_indices(t);
            prop_assert_eq!(train.len() + plan.folds[t].len(), n);
            prop_assert!(train.iter().all(|i| plan.folds[t].binary_search(i).is_err()));
        }
        prop_assert_eq!(FoldPlan::from_json(&plan.to_json()).unwrap(), plan.clone());
        prop_assert_eq!(kfold_split(n, k, seed).unwrap(), plan);
    }

    #[test]
    fn standardizer_matches_two_pass_moments(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..40)) {
        let s = Standardizer::fit(rows.iter().map(Vec::as_slice), 3);
        let n = rows.len() as f64;
        for c in 0..3 {
            let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!((s.mean[c] - mean).abs() <= 1e-9 * mean.abs().max(1.0));
            if var > 1e-9 {
                prop_assert!((s.std[c] - var.sqrt()).abs() <= 1e-9 * var.sqrt().max(1.0));
            }
        }
        let mut m = Matrix::from_rows(&rows).unwrap();
        Standardizer::identity(3).apply(&mut m);
        prop_assert_eq!(m, Matrix::from_rows(&rows).unwrap());
    }

    #[test]
    fn same_ap_graph_joins_exactly_shared_access_points(seed in any::<u64>(), n in 1usize..60) {
        let net = Network::default_split();
        let spec = RunSpec { n_tasks: n, ..RunSpec::default() }.with_seed(seed);
        let run = generate_run(&spec, &net.topology.access_points()).unwrap();
        let aps: Vec<u32> = run.iter().map(|k| k.ap).collect();
        let x = run_features(&FeatureSpace::new(&net, &QueuingParams::default()), &run, &net).unwrap();
        let g = build_graph(x, &aps, EdgeRule::SameAp, None, &net.catalog).unwrap();
        let a = g.adjacency_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(a.get(i, j) == 1.0, i != j && aps[i] == aps[j]);
            }
        }
    }
}

#[test]
fn dataset_round_trips_through_csv() {
    let cfg = DatasetConfig {
        runs: 6,
        spec: RunSpec { n_tasks: 30, ..RunSpec::default() },
        mode: SplitMode::Split,
        q: QueuingParams::default(),
        solver: SolverConfig::default(),
        seed: 3,
    };
    let net = Network::default_split();
    let (ds, report) = generate_dataset(&cfg, &net).unwrap();
    assert_eq!(ds.samples.len() + report.excluded_tasks, 180);
    assert_eq!(ds.header.n_features, 27);
    let mut buf = Vec::new();
    ds.write(&mut buf).unwrap();
    let back = Dataset::read(&buf[..]).unwrap();
    assert_eq!(back, ds);
    let mut again = Vec::new();
    back.write(&mut again).unwrap();
    assert_eq!(again, buf);
    let (ds2, _) = generate_dataset(&cfg, &net).unwrap();
    assert_eq!(ds2, ds);
}
