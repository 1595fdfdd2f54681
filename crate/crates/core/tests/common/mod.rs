#![allow(dead_code)]

use coin_placer::cost_model::{Network, QueuingParams};
use coin_placer::topology::{SplitMode, Topology};
use coin_placer::workload::TaskRequest;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random instance: at most 5 compute nodes and `max_tasks` tasks,
/// with capacities and rates drawn so that queue constraints bind often.
pub fn random_instance(seed: u64, max_tasks: usize) -> (Network, QueuingParams, Vec<TaskRequest>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_lower = rng.gen_range(1..=2u32);
    let n_upper = rng.gen_range(1..=2u32);
    let n_mec = rng.gen_range(0..=1u32);
    let mut topo = Topology::tiered(n_lower, n_upper, n_mec);
    for id in 0..n_lower + n_upper + n_mec {
        let cap = topo.capacity(id).unwrap();
        topo.set_capacity(id, cap * rng.gen_range(0.2..2.0));
    }
    let mode = if rng.gen_bool(0.5) { SplitMode::Split } else { SplitMode::NoSplit };
    let net = Network::new(topo, mode).unwrap();
    let q = QueuingParams { f_bar: 1e7 };
    let aps = net.topology.access_points();
    let n = rng.gen_range(0..=max_tasks);
    let run = (0..n)
        .map(|i| TaskRequest {
            task_id: i as u32,
            ap: aps[rng.gen_range(0..aps.len())],
            size_mb: rng.gen_range(1.0..20.0),
            workload_cycles: 1e7,
            deadline_s: rng.gen_range(0.005..0.2),
            arrival_rate: rng.gen_range(2.0..30.0),
        })
        .collect();
    (net, q, run)
}

/// Random task graph with `n` nodes and `f` features. Node 0 is always
/// isolated and, when `n >= 3`, nodes 1 and 2 are always joined.
pub fn random_graph(rng: &mut impl Rng, n: usize, f: usize, n_classes: usize) -> coin_placer::dataset::TaskGraph {
    use coin_placer::dataset::TaskGraph;
    use coin_placer::models::dense::Matrix;
    let x = Matrix::from_vec(n, f, (0..n * f).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap();
    let mut nb = vec![Vec::new(); n];
    for i in 1..n {
        for j in i + 1..n {
            if (i, j) == (1, 2) || rng.gen_bool(0.3) {
                nb[i].push(j as u32);
                nb[j].push(i as u32);
            }
        }
    }
    let labels = (0..n).map(|_| rng.gen_range(0..n_classes)).collect();
    TaskGraph::from_neighbors(x, nb, Some(labels))
}

/// Disjoint union of two graphs, `a`'s nodes first.
pub fn union(a: &coin_placer::dataset::TaskGraph, b: &coin_placer::dataset::TaskGraph) -> coin_placer::dataset::TaskGraph {
    use coin_placer::dataset::TaskGraph;
    use coin_placer::models::dense::Matrix;
    let off = a.len() as u32;
    let mut data = a.features.data.clone();
    data.extend_from_slice(&b.features.data);
    let x = Matrix::from_vec(a.len() + b.len(), a.features.cols, data).unwrap();
    let mut nb = a.neighbors.clone();
    nb.extend(b.neighbors.iter().map(|ns| ns.iter().map(|&j| j + off).collect::<Vec<u32>>()));
    let labels = match (&a.labels, &b.labels) {
        (Some(x), Some(y)) => Some(x.iter().chain(y).copied().collect()),
        _ => None,
    };
    TaskGraph::from_neighbors(x, nb, labels)
}

/// Relabels node `i` of `g` as `perm[i]`.
pub fn permute(g: &coin_placer::dataset::TaskGraph, perm: &[usize]) -> coin_placer::dataset::TaskGraph {
    let n = g.len();
    let mut inv = vec![0; n];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    let x = g.features.select_rows(&inv);
    let nb = (0..n).map(|p| g.neighbors[inv[p]].iter().map(|&j| perm[j as usize] as u32).collect()).collect();
    coin_placer::dataset::TaskGraph::from_neighbors(x, nb, None)
}

/// Zero biases put dead units exactly on the ReLU kink, where central
/// differences see half the slope.
pub fn jitter<P: coin_placer::models::adam::ParamSet>(p: &mut P, rng: &mut impl Rng) {
    for b in p.blocks_mut() {
        b.iter_mut().for_each(|x| *x += rng.gen_range(-0.1..0.1));
    }
}

/// Worst relative error between `grad` and central differences (step
/// 1e-5) of `loss` over every scalar of `params`.
pub fn max_grad_rel_err<P: coin_placer::models::adam::ParamSet + Clone>(
    params: &P,
    grad: &P,
    loss: impl Fn(&P) -> f64,
) -> f64 {
    const H: f64 = 1e-5;
    let analytic: Vec<f64> = grad.blocks().into_iter().flatten().copied().collect();
    let mut worst = 0.0f64;
    let mut idx = 0;
    for b in 0..params.blocks().len() {
        for i in 0..params.blocks()[b].len() {
            let mut plus = params.clone();
            plus.blocks_mut()[b][i] += H;
            let mut minus = params.clone();
            minus.blocks_mut()[b][i] -= H;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * H);
            let a = analytic[idx];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            idx += 1;
        }
    }
    worst
}
