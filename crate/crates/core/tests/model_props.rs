mod common;

use coin_placer::cost_model::{Network, QueuingParams};
use coin_placer::dataset::{generate_dataset, DatasetConfig, TaskGraph};
use coin_placer::models::dense::Matrix;
use coin_placer::models::gcn::{gcn_forward, GcnParams};
use coin_placer::models::train::{run_folds, train_fold, ModelKind, TrainConfig, TrainedModel};
use coin_placer::models::tree::{dt_fit, dt_predict};
use coin_placer::solver::SolverConfig;
use coin_placer::topology::SplitMode;
use coin_placer::workload::RunSpec;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_from(seed: u64, n: usize) -> TaskGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_graph(&mut rng, n, 4, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_adjacency_matches_dense_oracle(seed in any::<u64>(), n in 1usize..12) {
        let g = graph_from(seed, n);
        let a = g.adjacency_dense();
        let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
        let dense = g.norm_adj.to_dense();
        for i in 0..n {
            prop_assert_eq!(a.get(i, i), 0.0);
            prop_assert_eq!(g.isolated[i], deg[i] == 0.0);
            for j in 0..n {
                prop_assert_eq!(a.get(i, j), a.get(j, i));
                let want = if a.get(i, j) > 0.0 { 1.0 / (deg[i] * deg[j]).sqrt() } else { 0.0 };
                prop_assert!((dense.get(i, j) - want).abs() <= 1e-15);
                prop_assert_eq!(dense.get(i, j), dense.get(j, i));
            }
        }
    }

    #[test]
    fn probabilities_are_normalized(seed in any::<u64>(), n in 1usize..12, self_term in any::<bool>()) {
        let g = graph_from(seed, n);
        let p = GcnParams::init(4, 6, 3, self_term, seed ^ 1);
        let probs = gcn_forward(&p, &g).unwrap();
        for r in 0..n {
            let s: f64 = probs.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(probs.row(r).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn gcn_is_permutation_equivariant(seed in any::<u64>(), n in 1usize..12, self_term in any::<bool>()) {
        let g = graph_from(seed, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 2));
        let p = GcnParams::init(4, 6, 3, self_term, seed ^ 3);
        let base = gcn_forward(&p, &g).unwrap();
        let moved = gcn_forward(&p, &common::permute(&g, &perm)).unwrap();
        for i in 0..n {
            for c in 0..3 {
                prop_assert!((base.get(i, c) - moved.get(perm[i], c)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn isolated_node_ignores_the_rest_of_the_graph(seed in any::<u64>(), n in 1usize..12) {
        let g = graph_from(seed, n);
        let p = GcnParams::init(4, 6, 3, true, seed ^ 4);
        let alone = TaskGraph::from_neighbors(g.features.select_rows(&[0]), vec![vec![]], None);
        let mut other = g.clone();
        for r in 1..n {
            other.features.row_mut(r).iter_mut().for_each(|x| *x = -*x + 0.5);
        }
        let a = gcn_forward(&p, &g).unwrap();
        let b = gcn_forward(&p, &alone).unwrap();
        let c = gcn_forward(&p, &other).unwrap();
        prop_assert!(g.isolated[0]);
        for k in 0..3 {
            prop_assert!((a.get(0, k) - b.get(0, k)).abs() <= 1e-15);
            prop_assert!((a.get(0, k) - c.get(0, k)).abs() <= 1e-15);
        }
    }

    #[test]
    fn tree_respects_depth_and_fits_consistent_data(seed in any::<u64>(), depth in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_vec(40, 3, (0..120).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect()).unwrap();
        let y: Vec<usize> = (0..40).map(|i| usize::from(x.get(i, 0) > 0.2) + usize::from(x.get(i, 2) > 0.5)).collect();
        let t = dt_fit(&x, &y, 3, depth).unwrap();
        prop_assert!(t.depth() <= depth);
        prop_assert!(t.validate().is_ok());
        let deep = dt_fit(&x, &y, 3, 40).unwrap();
        prop_assert_eq!(dt_predict(&deep, &x), y);
    }
}

fn small_dataset() -> coin_placer::dataset::Dataset {
    let cfg = DatasetConfig {
        runs: 12,
        spec: RunSpec { n_tasks: 40, ..RunSpec::default() },
        mode: SplitMode::Split,
        q: QueuingParams::default(),
        solver: SolverConfig::default(),
        seed: 5,
    };
    generate_dataset(&cfg, &Network::default_split()).unwrap().0
}

#[test]
fn training_is_deterministic_and_lowers_loss() {
    let ds = small_dataset();
    let plan = run_folds(&ds, 3, 1).unwrap();
    let cfg = TrainConfig { epochs: 25, delta: 8, mlp_hidden: vec![8, 8], ..TrainConfig::default() };
    for kind in [ModelKind::Gcn, ModelKind::Mlp] {
        let a = train_fold(&ds, &plan, 0, kind, &cfg).unwrap();
        let b = train_fold(&ds, &plan, 0, kind, &cfg).unwrap();
        assert_eq!(a.predictor, b.predictor, "{kind}");
        assert_eq!(a.val_pred, b.val_pred);
        let first = a.history.first().unwrap().train_loss;
        let last = a.history.last().unwrap().train_loss;
        assert!(last < first, "{kind}: train loss {first} -> {last}");
        assert!(matches!(
            (&a.predictor.model, kind),
            (TrainedModel::Gcn(_), ModelKind::Gcn) | (TrainedModel::Mlp(_), ModelKind::Mlp)
        ));
    }
}
