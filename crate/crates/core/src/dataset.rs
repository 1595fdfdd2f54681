//! Feature vectors, task graphs, k-fold plans and dataset files.
//!
//! Each task is described by its deadline and, for every executor node, the
//! queueing delay and stability the node offers when the request arrives.
//! Only nodes on the request's path from its access point to the MEC are
//! reported; the others read as unavailable. The load behind those numbers is
//! the demand that requests from the same access point, up to and including
//! this one, put on the network when each is served at its cheapest decision.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{network_cost, CostError, LoadTable, Network, QueuingParams};
use crate::models::dense::{Csr, Matrix};
use crate::par;
use crate::solver::{label_run, SolverConfig, SolverError};
use crate::topology::{Decision, DecisionCatalog, NodeId, SplitMode};
use crate::workload::{generate_run, RunSpec, TaskRequest, WorkloadError};

/// Delay reported for a saturated or unavailable node, in seconds.
pub const SENTINEL_DELAY_S: f64 = 10.0;
pub const DATASET_FORMAT_VERSION: u32 = 1;
const DATASET_MAGIC: &str = "# coin-placer dataset ";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("edge rule SameLabelNode needs labels")]
    MissingLabels,
    #[error("need at least {k} samples for {k} folds, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset format: {0}")]
    Format(String),
    #[error("cost model: {0}")]
    Cost(#[from] CostError),
    #[error("workload: {0}")]
    Workload(#[from] WorkloadError),
    #[error("run {run_id}: {source}")]
    Solver { run_id: u32, source: SolverError },
}

impl From<csv::Error> for DatasetError {
    fn from(e: csv::Error) -> Self {
        DatasetError::Format(e.to_string())
    }
}

/// Node order, service rates and per-access-point path masks.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    pub nodes: Vec<NodeId>,
    rates: Vec<f64>,
    on_path: BTreeMap<NodeId, Vec<bool>>,
}

impl FeatureSpace {
    pub fn new(net: &Network, q: &QueuingParams) -> FeatureSpace {
        let t = &net.topology;
        let nodes = t.executor_nodes();
        let rates = nodes.iter().map(|&n| t.capacity(n).unwrap_or(0.0) / q.f_bar).collect();
        let mecs = t.mecs();
        let mut on_path = BTreeMap::new();
        for ap in t.access_points() {
            let h = |a: NodeId, b: NodeId| net.hops.get(a, b).unwrap_or(u32::MAX);
            let nearest = mecs.iter().map(|&e| h(ap, e)).min();
            let mask = nodes
                .iter()
                .map(|&i| match nearest {
                    None => true,
                    Some(d) => {
                        mecs.contains(&i)
                            || mecs.iter().any(|&e| h(ap, e) == d && h(ap, i).saturating_add(h(i, e)) == d)
                    }
                })
                .collect();
            on_path.insert(ap, mask);
        }
        FeatureSpace { nodes, rates, on_path }
    }

    /// Feature count: deadline plus a delay and a stability slot per node.
    pub fn dim(&self) -> usize {
        2 * self.nodes.len() + 1
    }

    fn fill(&self, k: &TaskRequest, load_of: impl Fn(usize) -> f64, out: &mut [f64]) {
        let n = self.nodes.len();
        out[0] = k.deadline_s;
        let mask = self.on_path.get(&k.ap);
        for i in 0..n {
            let slack = self.rates[i] - load_of(i);
            let visible = mask.is_none_or(|m| m[i]);
            let stable = visible && slack > 0.0;
            out[1 + i] = if stable { 1.0 / slack } else { SENTINEL_DELAY_S };
            out[1 + n + i] = if stable { 1.0 } else { 0.0 };
        }
    }

    /// Feature vector of `k` under the given node loads.
    pub fn build_features(&self, k: &TaskRequest, loads: &LoadTable) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.fill(k, |i| loads.node_load(self.nodes[i]), &mut out);
        out
    }
}

/// The cheapest catalog decision for a task (lowest label on ties).
pub fn local_decision(k: &TaskRequest, net: &Network) -> Option<Decision> {
    let mut best: Option<(f64, Decision)> = None;
    for d in &net.catalog.decisions {
        if let Ok(c) = network_cost(k, d, &net.hops) {
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, *d));
            }
        }
    }
    best.map(|(_, d)| d)
}

/// Load snapshot behind each task's features, aligned with `run`.
pub fn arrival_loads(run: &[TaskRequest], net: &Network) -> Result<Vec<LoadTable>, DatasetError> {
    let mut order: Vec<usize> = (0..run.len()).collect();
    order.sort_by_key(|&i| run[i].task_id);
    let mut per_ap: BTreeMap<NodeId, LoadTable> = BTreeMap::new();
    let mut out = vec![LoadTable::default(); run.len()];
    for i in order {
        let k = &run[i];
        let table = per_ap.entry(k.ap).or_default();
        if let Some(d) = local_decision(k, net) {
            table.add_work_share(&d, k.arrival_rate, &net.topology)?;
        }
        out[i] = table.clone();
    }
    Ok(out)
}

/// Feature matrix of a run, one row per task in run order. Equivalent to
/// [`FeatureSpace::build_features`] over [`arrival_loads`].
pub fn run_features(space: &FeatureSpace, run: &[TaskRequest], net: &Network) -> Result<Matrix, DatasetError> {
    let n_nodes = space.nodes.len();
    let pos: BTreeMap<NodeId, usize> = space.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut order: Vec<usize> = (0..run.len()).collect();
    order.sort_by_key(|&i| run[i].task_id);
    let mut per_ap: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
    let mut shares: BTreeMap<Decision, Vec<(usize, f64)>> = BTreeMap::new();
    let mut out = Matrix::zeros(run.len(), space.dim());
    for i in order {
        let k = &run[i];
        let loads = per_ap.entry(k.ap).or_insert_with(|| vec![0.0; n_nodes]);
        if let Some(d) = local_decision(k, net) {
            if !shares.contains_key(&d) {
                let mut t = LoadTable::default();
                t.add_work_share(&d, 1.0, &net.topology)?;
                let s = t.node.iter().filter_map(|(n, &v)| pos.get(n).map(|&p| (p, v))).collect();
                shares.insert(d, s);
            }
            for &(p, share) in &shares[&d] {
                loads[p] += share * k.arrival_rate;
            }
        }
        let loads = &per_ap[&k.ap];
        space.fill(k, |p| loads[p], out.row_mut(i));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRule {
    /// Tasks entering through the same access point.
    SameAp,
    /// Tasks whose labelled decisions share a node.
    SameLabelNode,
}

impl std::str::FromStr for EdgeRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "same-ap" | "same_ap" => Ok(EdgeRule::SameAp),
            "same-label-node" | "same_label_node" => Ok(EdgeRule::SameLabelNode),
            _ => Err(format!("unknown edge rule {s:?} (expected same-ap|same-label-node)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    pub features: Matrix,
    /// Symmetric neighbour lists, no self loops.
    pub neighbors: Vec<Vec<u32>>,
    /// D^-1/2 A D^-1/2, empty rows for isolated nodes.
    pub norm_adj: Csr,
    pub isolated: Vec<bool>,
    pub labels: Option<Vec<usize>>,
}

impl TaskGraph {
    pub fn from_neighbors(features: Matrix, neighbors: Vec<Vec<u32>>, labels: Option<Vec<usize>>) -> TaskGraph {
        let deg: Vec<f64> = neighbors.iter().map(|n| n.len() as f64).collect();
        let rows: Vec<Vec<(u32, f64)>> = neighbors
            .iter()
            .enumerate()
            .map(|(i, ns)| ns.iter().map(|&j| (j, 1.0 / (deg[i] * deg[j as usize]).sqrt())).collect())
            .collect();
        let isolated = neighbors.iter().map(Vec::is_empty).collect();
        TaskGraph { features, norm_adj: Csr::from_rows(&rows), neighbors, isolated, labels }
    }

    pub fn len(&self) -> usize {
        self.features.rows
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows == 0
    }

    pub fn adjacency_dense(&self) -> Matrix {
        let n = self.len();
        let mut a = Matrix::zeros(n, n);
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                a.set(i, j as usize, 1.0);
            }
        }
        a
    }
}

/// Builds the task graph of one run. `aps` and `labels` are aligned with
/// the feature rows.
pub fn build_graph(
    features: Matrix,
    aps: &[NodeId],
    rule: EdgeRule,
    labels: Option<&[usize]>,
    catalog: &DecisionCatalog,
) -> Result<TaskGraph, DatasetError> {
    let n = features.rows;
    let mut neighbors = vec![Vec::new(); n];
    match rule {
        EdgeRule::SameAp => {
            let mut groups: BTreeMap<NodeId, Vec<u32>> = BTreeMap::new();
            for (i, &ap) in aps.iter().enumerate() {
                groups.entry(ap).or_default().push(i as u32);
            }
            for members in groups.values() {
                for &i in members {
                    neighbors[i as usize] = members.iter().copied().filter(|&j| j != i).collect();
                }
            }
        }
        EdgeRule::SameLabelNode => {
            let labels = labels.ok_or(DatasetError::MissingLabels)?;
            let nodes: Vec<Vec<NodeId>> =
                labels.iter().map(|&l| catalog.get(l).map(|d| d.nodes()).unwrap_or_default()).collect();
            for i in 0..n {
                for j in 0..n {
                    if i != j && nodes[i].iter().any(|x| nodes[j].contains(x)) {
                        neighbors[i].push(j as u32);
                    }
                }
            }
        }
    }
    Ok(TaskGraph::from_neighbors(features, neighbors, labels.map(<[usize]>::to_vec)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Indices outside fold `t`, ascending.
    pub fn train_indices(&self, t: usize) -> Vec<usize> {
        let mut idx: Vec<usize> =
            self.folds.iter().enumerate().filter(|&(i, _)| i != t).flat_map(|(_, f)| f.iter().copied()).collect();
        idx.sort_unstable();
        idx
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plan serializes")
    }

    pub fn from_json(text: &str) -> Result<FoldPlan, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::Format(e.to_string()))
    }
}

/// Seeded permutation of `0..n` cut into `k` folds; the first `n % k` folds
/// get one extra index.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan, DatasetError> {
    if k == 0 || n < k {
        return Err(DatasetError::TooFewSamples { n, k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for t in 0..k {
        let len = base + usize::from(t < extra);
        let mut f = idx[start..start + len].to_vec();
        f.sort_unstable();
        folds.push(f);
        start += len;
    }
    Ok(FoldPlan { seed, k, folds })
}

/// Per-column z-scoring fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Standardizer {
        let mut n = 0.0;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            n += 1.0;
            for c in 0..dim {
                let d = row[c] - mean[c];
                mean[c] += d / n;
                m2[c] += d * (row[c] - mean[c]);
            }
        }
        let std = m2.iter().map(|&v| if n > 0.0 && v > 0.0 { (v / n).sqrt() } else { 1.0 }).collect();
        Standardizer { mean, std }
    }

    pub fn identity(dim: usize) -> Standardizer {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn apply(&self, m: &mut Matrix) {
        for r in 0..m.rows {
            for (c, x) in m.row_mut(r).iter_mut().enumerate() {
                *x = (*x - self.mean[c]) / self.std[c];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub run_id: u32,
    pub task_id: u32,
    pub ap: NodeId,
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub n_features: usize,
    pub catalog: DecisionCatalog,
    /// Generation settings, recorded for reproduction.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

/// Samples of one run, as indices into [`Dataset::samples`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSlice {
    pub run_id: u32,
    pub rows: Vec<usize>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.header.catalog.len()
    }

    /// Runs in order of first appearance.
    pub fn runs(&self) -> Vec<RunSlice> {
        let mut out: Vec<RunSlice> = Vec::new();
        let mut pos: BTreeMap<u32, usize> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            let p = *pos.entry(s.run_id).or_insert_with(|| {
                out.push(RunSlice { run_id: s.run_id, rows: Vec::new() });
                out.len() - 1
            });
            out[p].rows.push(i);
        }
        out
    }

    pub fn feature_matrix(&self, rows: &[usize]) -> Matrix {
        let dim = self.header.n_features;
        let mut m = Matrix::zeros(rows.len(), dim);
        for (i, &r) in rows.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&self.samples[r].features);
        }
        m
    }

    pub fn labels(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.samples[r].label).collect()
    }

    /// Graph of one run with standardized features.
    pub fn graph(&self, run: &RunSlice, rule: EdgeRule, scaler: &Standardizer) -> Result<TaskGraph, DatasetError> {
        let mut x = self.feature_matrix(&run.rows);
        scaler.apply(&mut x);
        let aps: Vec<NodeId> = run.rows.iter().map(|&r| self.samples[r].ap).collect();
        let labels = self.labels(&run.rows);
        build_graph(x, &aps, rule, Some(&labels), &self.header.catalog)
    }

    pub fn column_names(n_features: usize) -> Vec<String> {
        let mut cols = vec!["run_id".to_string(), "task_id".to_string(), "ap".to_string()];
        cols.extend((0..n_features).map(|i| format!("f{i:02}")));
        cols.push("label".to_string());
        cols
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), DatasetError> {
        let header = serde_json::to_string(&self.header).map_err(|e| DatasetError::Format(e.to_string()))?;
        writeln!(out, "{DATASET_MAGIC}{header}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Dataset::column_names(self.header.n_features))?;
        let mut rec: Vec<String> = Vec::with_capacity(self.header.n_features + 4);
        for s in &self.samples {
            if s.features.len() != self.header.n_features {
                return Err(DatasetError::Format(format!(
                    "sample ({}, {}) has {} features, header says {}",
                    s.run_id,
                    s.task_id,
                    s.features.len(),
                    self.header.n_features
                )));
            }
            rec.clear();
            rec.push(s.run_id.to_string());
            rec.push(s.task_id.to_string());
            rec.push(s.ap.to_string());
            rec.extend(s.features.iter().map(|v| v.to_string()));
            rec.push(s.label.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Dataset, DatasetError> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let json = first
            .trim_end()
            .strip_prefix(DATASET_MAGIC)
            .ok_or_else(|| DatasetError::Format("missing dataset header line".into()))?;
        let header: DatasetHeader =
            serde_json::from_str(json).map_err(|e| DatasetError::Format(format!("header: {e}")))?;
        if header.version != DATASET_FORMAT_VERSION {
            return Err(DatasetError::Format(format!(
                "version {} not supported (expected {DATASET_FORMAT_VERSION})",
                header.version
            )));
        }
        let expected = Dataset::column_names(header.n_features);
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let cols: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if cols != expected {
            return Err(DatasetError::Format(format!("columns {cols:?} do not match {expected:?}")));
        }
        let parse_err = |line: u64, what: &str| DatasetError::Format(format!("line {line}: bad {what}"));
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != expected.len() {
                return Err(DatasetError::Format(format!("line {line}: {} columns, expected {}", rec.len(), expected.len())));
            }
            let num = |i: usize| -> Result<f64, DatasetError> { rec[i].parse().map_err(|_| parse_err(line, &expected[i])) };
            let features = (3..3 + header.n_features).map(num).collect::<Result<Vec<f64>, _>>()?;
            let label: usize = rec[expected.len() - 1].parse().map_err(|_| parse_err(line, "label"))?;
            if label >= header.catalog.len() {
                return Err(DatasetError::Format(format!("line {line}: label {label} outside the catalog")));
            }
            samples.push(Sample {
                run_id: rec[0].parse().map_err(|_| parse_err(line, "run_id"))?,
                task_id: rec[1].parse().map_err(|_| parse_err(line, "task_id"))?,
                ap: rec[2].parse().map_err(|_| parse_err(line, "ap"))?,
                features,
                label,
            });
        }
        Ok(Dataset { header, samples })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub runs: usize,
    pub spec: RunSpec,
    pub mode: SplitMode,
    pub q: QueuingParams,
    pub solver: SolverConfig,
    /// Root seed; run `r` uses [`derive_seed`]`(seed, r)`.
    pub seed: u64,
}

/// Seed of stream `r` (a run, a fold), decorrelated from the root seed.
pub fn derive_seed(root: u64, r: u64) -> u64 {
    let mut z = root.wrapping_add(r.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub runs: usize,
    pub samples: usize,
    pub excluded_tasks: usize,
    pub mec_offload_pct: f64,
    pub solver_wall_time_s: Vec<f64>,
}

/// Generates, solves and featurizes `cfg.runs` runs.
pub fn generate_dataset(cfg: &DatasetConfig, net: &Network) -> Result<(Dataset, GenerationReport), DatasetError> {
    let aps = net.topology.access_points();
    let space = FeatureSpace::new(net, &cfg.q);
    let per_run = par::map_range(cfg.runs, |r| -> Result<_, DatasetError> {
        let run_id = r as u32;
        let run = generate_run(&cfg.spec.with_seed(derive_seed(cfg.seed, r as u64)), &aps)?;
        let labels =
            label_run(&run, net, &cfg.q, &cfg.solver).map_err(|source| DatasetError::Solver { run_id, source })?;
        let x = run_features(&space, &labels.solved, net)?;
        let by_id: BTreeMap<u32, usize> = labels.labels.iter().map(|l| (l.task_id, l.label)).collect();
        let mut rows: Vec<Sample> = labels
            .solved
            .iter()
            .enumerate()
            .map(|(i, k)| Sample { run_id, task_id: k.task_id, ap: k.ap, features: x.row(i).to_vec(), label: by_id[&k.task_id] })
            .collect();
        rows.sort_by_key(|s| s.task_id);
        let fo = labels.solution.assignment.choice.iter().filter(|d| d.is_some_and(|d| d.is_fo())).count();
        Ok((rows, labels.excluded.len(), fo, labels.solution.stats.wall_time_s))
    });
    let mut samples = Vec::new();
    let (mut excluded, mut fo) = (0, 0);
    let mut times = Vec::new();
    for r in per_run {
        let (rows, ex, f, t) = r?;
        samples.extend(rows);
        excluded += ex;
        fo += f;
        times.push(t);
    }
    let n = samples.len();
    let header = DatasetHeader {
        version: DATASET_FORMAT_VERSION,
        n_features: space.dim(),
        catalog: net.catalog.clone(),
        config: serde_json::to_value(cfg).expect("config serializes"),
    };
    let report = GenerationReport {
        runs: cfg.runs,
        samples: n,
        excluded_tasks: excluded,
        mec_offload_pct: if n == 0 { 0.0 } else { 100.0 * fo as f64 / n as f64 },
        solver_wall_time_s: times,
    };
    Ok((Dataset { header, samples }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    fn task(id: u32, ap: NodeId, deadline_s: f64) -> TaskRequest {
        TaskRequest { task_id: id, ap, size_mb: 10.0, workload_cycles: 1e7, deadline_s, arrival_rate: 10.0 }
    }

    #[test]
    fn default_feature_layout() {
        let net = Network::default_split();
        let q = QueuingParams { f_bar: 1e7 };
        let space = FeatureSpace::new(&net, &q);
        assert_eq!(space.dim(), 27);
        let f = space.build_features(&task(0, 13, 0.07), &LoadTable::default());
        assert_eq!(f[0], 0.07);
        // MEC is the last node: idle delay F̄/F = 1 ms, stable.
        assert_eq!(f[13], 1.0e-3);
        assert_eq!(f[26], 1.0);
        // AP 13 reaches the MEC through lower 0 and upper 8.
        assert_eq!(f[1], 1.0 / 50.0);
        assert_eq!(f[9], 1.0 / 100.0);
        assert_eq!(f[2], SENTINEL_DELAY_S);
        assert_eq!(f[15], 0.0);
    }

    #[test]
    fn saturated_node_reads_as_sentinel() {
        let net = Network::default_split();
        let q = QueuingParams { f_bar: 1e7 };
        let space = FeatureSpace::new(&net, &q);
        let mut loads = LoadTable::default();
        loads.node.insert(12, 1000.0);
        let f = space.build_features(&task(0, 13, 0.07), &loads);
        assert_eq!(f[13], SENTINEL_DELAY_S);
        assert_eq!(f[26], 0.0);
    }

    #[test]
    fn arrival_loads_follow_access_point_demand() {
        let net = Network::default_split();
        let run = vec![task(2, 13, 0.1), task(0, 13, 0.1), task(1, 14, 0.1)];
        let loads = arrival_loads(&run, &net).unwrap();
        // Task 2 arrives after task 0 at the same AP; pair (0, 8) splits 1:2.
        assert!((loads[0].node_load(0) - 20.0 / 3.0).abs() < 1e-12);
        assert!((loads[0].node_load(8) - 40.0 / 3.0).abs() < 1e-12);
        assert!((loads[1].node_load(0) - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(loads[2].node_load(0), 0.0);
        let space = FeatureSpace::new(&net, &QueuingParams::default());
        let x = run_features(&space, &run, &net).unwrap();
        for (i, k) in run.iter().enumerate() {
            assert_eq!(x.row(i), &space.build_features(k, &loads[i])[..]);
        }
    }

    #[test]
    fn graph_examples() {
        let cat = DecisionCatalog::build(&Topology::build_default(), SplitMode::Split);
        let g = build_graph(Matrix::zeros(2, 1), &[13, 13], EdgeRule::SameAp, None, &cat).unwrap();
        assert_eq!(g.adjacency_dense().data, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(g.norm_adj.to_dense().data, vec![0.0, 1.0, 1.0, 0.0]);
        let g = build_graph(Matrix::zeros(2, 1), &[13, 14], EdgeRule::SameAp, None, &cat).unwrap();
        assert_eq!(g.isolated, vec![true, true]);
        assert_eq!(g.norm_adj.nnz(), 0);
        let g = build_graph(Matrix::zeros(3, 1), &[13, 14, 15], EdgeRule::SameLabelNode, Some(&[8, 8, 8]), &cat).unwrap();
        let a = g.norm_adj.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.get(i, j), if i == j { 0.0 } else { 0.5 });
            }
        }
        assert!(matches!(
            build_graph(Matrix::zeros(1, 1), &[13], EdgeRule::SameLabelNode, None, &cat),
            Err(DatasetError::MissingLabels)
        ));
    }

    #[test]
    fn fold_examples() {
        let p = kfold_split(100, 10, 1).unwrap();
        assert!(p.folds.iter().all(|f| f.len() == 10));
        let p = kfold_split(101, 10, 1).unwrap();
        let mut sizes: Vec<usize> = p.folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [vec![10; 9], vec![11]].concat());
        assert!(matches!(kfold_split(5, 10, 1), Err(DatasetError::TooFewSamples { n: 5, k: 10 })));
        assert_eq!(FoldPlan::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn dataset_round_trip_and_truncation() {
        let net = Network::default_split();
        let cfg = DatasetConfig {
            runs: 2,
            spec: RunSpec { n_tasks: 20, ..RunSpec::default() },
            mode: SplitMode::Split,
            q: QueuingParams::default(),
            solver: SolverConfig::default(),
            seed: 9,
        };
        let (ds, report) = generate_dataset(&cfg, &net).unwrap();
        assert_eq!(report.samples, 40);
        let mut buf = Vec::new();
        ds.write(&mut buf).unwrap();
        assert_eq!(Dataset::read(&buf[..]).unwrap(), ds);
        let text = String::from_utf8(buf.clone()).unwrap();
        let header_row = text.lines().nth(1).unwrap();
        assert!(header_row.starts_with("run_id,task_id,ap,f00,f01,"));
        assert!(header_row.ends_with(",f26,label"));
        let cut = &buf[..buf.len() - 40];
        assert!(matches!(Dataset::read(cut), Err(DatasetError::Format(_))));
    }
}
