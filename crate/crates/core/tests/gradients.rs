mod common;

use coin_placer::models::adam::ParamSet;
use coin_placer::models::dense::Matrix;
use coin_placer::models::gcn::{gcn_backward, gcn_forward, gcn_loss, GcnParams};
use coin_placer::models::mlp::{mlp_backward, mlp_forward, MlpParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_REL_ERR: f64 = 1e-4;

#[test]
fn gcn_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..24 {
        let n = rng.gen_range(1..=10);
        let f = rng.gen_range(1..=6);
        let delta = rng.gen_range(1..=8);
        let classes = rng.gen_range(2..=5);
        let g = common::random_graph(&mut rng, n, f, classes);
        let labels = g.labels.clone().unwrap();
        let mut p = GcnParams::init(f, delta, classes, case % 3 != 0, rng.gen());
        common::jitter(&mut p, &mut rng);
        let (loss, grad) = gcn_backward(&p, &g, &labels).unwrap();
        assert!((loss - gcn_loss(&gcn_forward(&p, &g).unwrap(), &labels)).abs() < 1e-12);
        let worst = common::max_grad_rel_err(&p, &grad, |q| gcn_loss(&gcn_forward(q, &g).unwrap(), &labels));
        assert!(worst < MAX_REL_ERR, "case {case}: n={n} δ={delta} worst relative error {worst:e}");
    }
}

#[test]
fn mlp_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..24 {
        let n = rng.gen_range(1..=10);
        let f = rng.gen_range(1..=6);
        let classes = rng.gen_range(2..=5);
        let dims = [f, rng.gen_range(1..=8), rng.gen_range(1..=8), classes];
        let x = Matrix::from_vec(n, f, (0..n * f).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        let mut p = MlpParams::init(&dims, rng.gen());
        common::jitter(&mut p, &mut rng);
        let (_, grad) = mlp_backward(&p, &x, &labels).unwrap();
        let worst = common::max_grad_rel_err(&p, &grad, |q| gcn_loss(&mlp_forward(q, &x).unwrap(), &labels));
        assert!(worst < MAX_REL_ERR, "case {case}: dims {dims:?} worst relative error {worst:e}");
    }
}

#[test]
fn union_gradient_is_size_weighted_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let (f, classes) = (4, 3);
        let (na, nb) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let a = common::random_graph(&mut rng, na, f, classes);
        let b = common::random_graph(&mut rng, nb, f, classes);
        let u = common::union(&a, &b);
        let p = GcnParams::init(f, 5, classes, true, rng.gen());
        let (la, ga) = gcn_backward(&p, &a, a.labels.as_ref().unwrap()).unwrap();
        let (lb, gb) = gcn_backward(&p, &b, b.labels.as_ref().unwrap()).unwrap();
        let (lu, gu) = gcn_backward(&p, &u, u.labels.as_ref().unwrap()).unwrap();
        let (wa, wb) = (a.len() as f64 / u.len() as f64, b.len() as f64 / u.len() as f64);
        assert!((lu - (wa * la + wb * lb)).abs() < 1e-12);
        for ((x, y), z) in ga.blocks().into_iter().flatten().zip(gb.blocks().into_iter().flatten()).zip(gu.blocks().into_iter().flatten()) {
            assert!((z - (wa * x + wb * y)).abs() < 1e-12, "{z} vs {}", wa * x + wb * y);
        }
    }
}

#[test]
fn duplicated_graph_has_the_same_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let g = common::random_graph(&mut rng, 7, 3, 4);
    let p = GcnParams::init(3, 6, 4, true, 5);
    let labels = g.labels.clone().unwrap();
    let (l1, g1) = gcn_backward(&p, &g, &labels).unwrap();
    let u = common::union(&g, &g);
    let (l2, g2) = gcn_backward(&p, &u, u.labels.as_ref().unwrap()).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    for (x, y) in g1.blocks().into_iter().flatten().zip(g2.blocks().into_iter().flatten()) {
        assert!((x - y).abs() < 1e-12);
    }
}
