//! Classification metrics, performance gain against the solver, MEC offload
//! shares, timing, and the request-rate experiment suite.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{
    network_cost, queue_delay, reference_po, service_rate, Assignment, CostError, LoadTable, Network, QueuingParams,
};
use crate::dataset::{derive_seed, run_features, DatasetError, FeatureSpace};
use crate::models::train::{ModelKind, Predictor, TrainError};
use crate::par;
use crate::solver::{label_run, SolveStatus, SolverConfig, SolverError};
use crate::topology::{Decision, NodeId};
use crate::workload::{generate_run, Param, RunSpec, TaskRequest, WorkloadError, RELAXED_DEADLINES, STRICT_DEADLINES};

/// Reference accuracy and macro-F1 of the graph model at full scale.
pub const REFERENCE_GCN_ACCURACY: f64 = 0.9244;
pub const REFERENCE_GCN_MACRO_F1: f64 = 0.9196;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} predictions for {1} labels")]
    LengthMismatch(usize, usize),
    #[error("label {label} outside {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("task {task_id} has no feasible placement left")]
    InfeasibleModelAssignment { task_id: u32 },
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(pred: &[usize], labels: &[usize], n_classes: usize) -> Result<ConfusionMatrix, EvalError> {
        if pred.len() != labels.len() {
            return Err(EvalError::LengthMismatch(pred.len(), labels.len()));
        }
        let mut counts = vec![vec![0; n_classes]; n_classes];
        for (&p, &y) in pred.iter().zip(labels) {
            for label in [p, y] {
                if label >= n_classes {
                    return Err(EvalError::LabelOutOfRange { label, n_classes });
                }
            }
            counts[y][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub n_samples: u64,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> MetricsReport {
        let n = cm.counts.len();
        let total = cm.total();
        let (mut p_sum, mut r_sum, mut f_sum, mut classes) = (0.0, 0.0, 0.0, 0usize);
        for c in 0..n {
            let support: u64 = cm.counts[c].iter().sum();
            if support == 0 {
                continue;
            }
            let predicted: u64 = (0..n).map(|r| cm.counts[r][c]).sum();
            let tp = cm.counts[c][c] as f64;
            let p = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let r = tp / support as f64;
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            p_sum += p;
            r_sum += r;
            f_sum += f;
            classes += 1;
        }
        let m = classes.max(1) as f64;
        MetricsReport {
            accuracy: if total == 0 { 0.0 } else { cm.trace() as f64 / total as f64 },
            macro_precision: p_sum / m,
            macro_recall: r_sum / m,
            macro_f1: f_sum / m,
            n_samples: total,
        }
    }
}

pub fn metrics(pred: &[usize], labels: &[usize], n_classes: usize) -> Result<MetricsReport, EvalError> {
    Ok(MetricsReport::from_confusion(&ConfusionMatrix::new(pred, labels, n_classes)?))
}

/// Solver cost over model cost: 1 is optimal, lower is worse.
pub fn performance_gain(solver_cost: f64, model_cost: f64) -> f64 {
    if model_cost == 0.0 {
        if solver_cost == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        solver_cost / model_cost
    }
}

/// Percentage of assigned tasks placed on a MEC.
pub fn mec_offload_pct(a: &Assignment) -> f64 {
    let assigned: Vec<&Decision> = a.choice.iter().flatten().collect();
    if assigned.is_empty() {
        return 0.0;
    }
    100.0 * assigned.iter().filter(|d| d.is_fo()).count() as f64 / assigned.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub assignment: Assignment,
    /// Whether each task's proposed decision was replaced.
    pub repaired: Vec<bool>,
    pub cost: f64,
}

impl RepairOutcome {
    pub fn repaired_count(&self) -> usize {
        self.repaired.iter().filter(|&&r| r).count()
    }
}

struct Placement<'a> {
    net: &'a Network,
    q: &'a QueuingParams,
    loads: LoadTable,
    /// Tightest deadline on each executor queue.
    min_deadline: BTreeMap<Decision, f64>,
    /// FO tasks per MEC queue with their reference PO.
    fo_refs: BTreeMap<Decision, Vec<Decision>>,
}

impl Placement<'_> {
    fn admits(&self, k: &TaskRequest, d: &Decision) -> Result<bool, EvalError> {
        let t = &self.net.topology;
        let load = self.loads.executor_load(d) + k.arrival_rate;
        let slack = service_rate(d, self.q, t)? - load;
        if slack <= 0.0 {
            return Ok(false);
        }
        let delay = 1.0 / slack;
        let tightest = self.min_deadline.get(d).map_or(k.deadline_s, |&m| m.min(k.deadline_s));
        if delay > tightest {
            return Ok(false);
        }
        if d.is_fo() {
            let own = if let Some(po) = reference_po(k, self.net) { vec![po] } else { vec![] };
            let refs = self.fo_refs.get(d).into_iter().flatten().chain(&own);
            for po in refs {
                if let Ok(po_delay) = queue_delay(po, &self.loads, self.q, t) {
                    if delay > po_delay {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    fn place(&mut self, k: &TaskRequest, d: Decision) {
        self.loads.add(&d, k.arrival_rate);
        let m = self.min_deadline.entry(d).or_insert(k.deadline_s);
        *m = m.min(k.deadline_s);
        if d.is_fo() {
            if let Some(po) = reference_po(k, self.net) {
                self.fo_refs.entry(d).or_default().push(po);
            }
        }
    }
}

/// Makes a proposed assignment feasible. Tasks are taken in task-id order;
/// each keeps its proposed decision if that stays feasible together with the
/// tasks already placed, and otherwise takes the cheapest decision that does.
pub fn repair(
    run: &[TaskRequest],
    proposed: &[Option<Decision>],
    net: &Network,
    q: &QueuingParams,
) -> Result<RepairOutcome, EvalError> {
    if proposed.len() != run.len() {
        return Err(EvalError::LengthMismatch(proposed.len(), run.len()));
    }
    let mut order: Vec<usize> = (0..run.len()).collect();
    order.sort_by_key(|&i| run[i].task_id);
    let mut state = Placement { net, q, loads: LoadTable::default(), min_deadline: BTreeMap::new(), fo_refs: BTreeMap::new() };
    let mut choice = vec![None; run.len()];
    let mut repaired = vec![false; run.len()];
    let mut cost = 0.0;
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(net.catalog.len());
    for i in order {
        let k = &run[i];
        let keep = match proposed[i] {
            Some(d) if net.catalog.index_of(&d).is_some() => state.admits(k, &d)?.then_some(d),
            _ => None,
        };
        let d = match keep {
            Some(d) => d,
            None => {
                ranked.clear();
                for (l, d) in net.catalog.decisions.iter().enumerate() {
                    ranked.push((network_cost(k, d, &net.hops)?, l));
                }
                ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut found = None;
                for &(_, l) in &ranked {
                    let d = net.catalog.decisions[l];
                    if state.admits(k, &d)? {
                        found = Some(d);
                        break;
                    }
                }
                repaired[i] = true;
                found.ok_or(EvalError::InfeasibleModelAssignment { task_id: k.task_id })?
            }
        };
        cost += network_cost(k, &d, &net.hops)?;
        state.place(k, d);
        choice[i] = Some(d);
    }
    Ok(RepairOutcome { assignment: Assignment { choice }, repaired, cost })
}

/// Placement policies compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Solver,
    Model(ModelKind),
    /// Every task fully offloaded to its nearest MEC, then repaired.
    MecOnly,
}

impl Policy {
    pub fn name(self) -> String {
        match self {
            Policy::Solver => "solver".into(),
            Policy::Model(ModelKind::Gcn) => "gnn".into(),
            Policy::Model(k) => k.name().into(),
            Policy::MecOnly => "meconly".into(),
        }
    }
}

fn nearest_mec(k: &TaskRequest, net: &Network) -> Option<Decision> {
    let mut best: Option<(u32, NodeId)> = None;
    for d in &net.catalog.decisions {
        if let Decision::Fo { e } = *d {
            let h = net.hops.get(k.ap, e).unwrap_or(u32::MAX);
            if best.is_none_or(|(bh, _)| h < bh) {
                best = Some((h, e));
            }
        }
    }
    best.map(|(_, e)| Decision::Fo { e })
}

/// Model predictions for one run as decisions aligned with `run`.
pub fn predict_decisions(
    predictor: &Predictor,
    space: &FeatureSpace,
    run: &[TaskRequest],
    net: &Network,
) -> Result<Vec<Option<Decision>>, EvalError> {
    let x = run_features(space, run, net)?;
    let aps: Vec<NodeId> = run.iter().map(|k| k.ap).collect();
    let labels = predictor.predict_run(&x, &aps, None, &net.catalog)?;
    Ok(labels.into_iter().map(|l| net.catalog.get(l)).collect())
}

/// Solver outcome and each policy's repaired outcome on one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub n_tasks: usize,
    pub excluded: usize,
    pub solver_cost: f64,
    pub solver_mec_pct: f64,
    pub policy_cost: BTreeMap<String, f64>,
    pub policy_mec_pct: BTreeMap<String, f64>,
    pub policy_repaired: BTreeMap<String, usize>,
    pub solver_wall_time_s: f64,
}

pub fn evaluate_run(
    run: &[TaskRequest],
    net: &Network,
    q: &QueuingParams,
    solver: &SolverConfig,
    predictors: &BTreeMap<ModelKind, Predictor>,
) -> Result<RunOutcome, EvalError> {
    let labels = label_run(run, net, q, solver)?;
    let solved = &labels.solved;
    let sol = &labels.solution;
    let space = FeatureSpace::new(net, q);
    let mut out = RunOutcome {
        n_tasks: solved.len(),
        excluded: labels.excluded.len(),
        solver_cost: sol.cost,
        solver_mec_pct: mec_offload_pct(&sol.assignment),
        policy_cost: BTreeMap::new(),
        policy_mec_pct: BTreeMap::new(),
        policy_repaired: BTreeMap::new(),
        solver_wall_time_s: sol.stats.wall_time_s,
    };
    let mut proposals: Vec<(Policy, Vec<Option<Decision>>)> = Vec::new();
    for (&kind, p) in predictors {
        proposals.push((Policy::Model(kind), predict_decisions(p, &space, solved, net)?));
    }
    proposals.push((Policy::MecOnly, solved.iter().map(|k| nearest_mec(k, net)).collect()));
    for (policy, prop) in proposals {
        let r = repair(solved, &prop, net, q)?;
        out.policy_cost.insert(policy.name(), r.cost);
        out.policy_mec_pct.insert(policy.name(), mec_offload_pct(&r.assignment));
        out.policy_repaired.insert(policy.name(), r.repaired_count());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub n_tasks: usize,
    pub runs: usize,
    pub solver_median_s: f64,
    pub inference_median_s: f64,
    /// Solver time over inference time; absent when either is zero.
    pub ratio: Option<f64>,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Median wall time of the exact solver and of feature construction plus
/// model inference, measured one run at a time on the calling thread.
pub fn timing_bench(
    runs: &[Vec<TaskRequest>],
    net: &Network,
    q: &QueuingParams,
    solver: &SolverConfig,
    predictor: &Predictor,
) -> Result<TimingReport, EvalError> {
    let space = FeatureSpace::new(net, q);
    let (mut ts, mut ti) = (Vec::new(), Vec::new());
    for run in runs {
        let start = Instant::now();
        let sol = crate::solver::branch_and_bound(run, net, q, solver);
        ts.push(start.elapsed().as_secs_f64());
        if !sol.optimal && !run.is_empty() && sol.status == crate::solver::SolveStatus::TimedOut {
            return Err(SolverError::NotOptimal(sol.status).into());
        }
        let start = Instant::now();
        let pred = predict_decisions(predictor, &space, run, net)?;
        ti.push(start.elapsed().as_secs_f64());
        std::hint::black_box(pred);
    }
    let n_tasks = runs.first().map_or(0, Vec::len);
    let (s, i) = (median(&mut ts), median(&mut ti));
    let ratio = (n_tasks > 0 && s > 0.0 && i > 0.0).then(|| s / i);
    Ok(TimingReport { n_tasks, runs: runs.len(), solver_median_s: s, inference_median_s: i, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub rates: Vec<f64>,
    pub runs_per_rate: usize,
    pub n_tasks: usize,
    pub timing_task_counts: Vec<usize>,
    pub timing_runs: usize,
    pub q: QueuingParams,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            rates: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            runs_per_rate: 10,
            n_tasks: crate::workload::DEFAULT_TASKS_PER_RUN,
            timing_task_counts: vec![50, 150, 275],
            timing_runs: 5,
            q: QueuingParams::default(),
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

/// Aggregates at one request rate under one deadline scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: String,
    pub rate: f64,
    pub runs: usize,
    /// Mean per-run network cost of each policy, solver included.
    pub cost: BTreeMap<String, f64>,
    /// Mean per-run PG of each policy against the solver.
    pub pg: BTreeMap<String, f64>,
    pub mec_pct_split: BTreeMap<String, f64>,
    pub mec_pct_nosplit: f64,
    /// No-split runs whose share comes from an unproven incumbent.
    pub nosplit_timeouts: usize,
    pub repaired: BTreeMap<String, usize>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub config: SuiteConfig,
    pub results: Vec<ExperimentResult>,
    pub timing: Vec<TimingReport>,
}

/// %MEC of the no-split optimum and whether the solver ran out of time. A
/// timed-out search still reports its best incumbent; only a timeout with
/// no incumbent is an error.
fn nosplit_share(run: &[TaskRequest], net: &Network, q: &QueuingParams, solver: &SolverConfig) -> Result<(f64, bool), EvalError> {
    let solved: Vec<TaskRequest> =
        run.iter().filter(|k| crate::solver::standalone_infeasibility(k, net, q).is_none()).copied().collect();
    let sol = crate::solver::branch_and_bound(&solved, net, q, solver);
    match sol.status {
        SolveStatus::Optimal => Ok((mec_offload_pct(&sol.assignment), false)),
        SolveStatus::TimedOut if sol.assignment.choice.iter().all(Option::is_some) => {
            Ok((mec_offload_pct(&sol.assignment), true))
        }
        status => Err(SolverError::NotOptimal(status).into()),
    }
}

fn sweep_spec(cfg: &SuiteConfig, rate: f64, deadlines: (f64, f64)) -> RunSpec {
    RunSpec { n_tasks: cfg.n_tasks, deadline_range_s: deadlines, arrival_rate: Param::Const(rate), ..RunSpec::default() }
}

/// Runs the rate sweep under strict and relaxed deadlines. Runs at every
/// rate and in both scenarios share seeds, so they differ only in the swept
/// quantity.
pub fn experiment_suite(
    cfg: &SuiteConfig,
    split: &Network,
    nosplit: &Network,
    predictors: &BTreeMap<ModelKind, Predictor>,
) -> Result<SuiteResult, EvalError> {
    let aps = split.topology.access_points();
    let mut results = Vec::new();
    for (scenario, deadlines) in [("strict", STRICT_DEADLINES), ("relaxed", RELAXED_DEADLINES)] {
        for &rate in &cfg.rates {
            let spec = sweep_spec(cfg, rate, deadlines);
            let outcomes = par::map_range(cfg.runs_per_rate, |r| -> Result<_, EvalError> {
                let run = generate_run(&spec.with_seed(derive_seed(cfg.seed, r as u64)), &aps)?;
                let o = evaluate_run(&run, split, &cfg.q, &cfg.solver, predictors)?;
                let ns = nosplit_share(&run, nosplit, &cfg.q, &cfg.solver)?;
                Ok((o, ns))
            });
            let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
            let n = outcomes.len().max(1) as f64;
            let mut res = ExperimentResult {
                scenario: scenario.into(),
                rate,
                runs: outcomes.len(),
                cost: BTreeMap::new(),
                pg: BTreeMap::new(),
                mec_pct_split: BTreeMap::new(),
                mec_pct_nosplit: outcomes.iter().map(|o| o.1 .0).sum::<f64>() / n,
                nosplit_timeouts: outcomes.iter().filter(|o| o.1 .1).count(),
                repaired: BTreeMap::new(),
                excluded: outcomes.iter().map(|o| o.0.excluded).sum(),
            };
            res.cost.insert("solver".into(), outcomes.iter().map(|o| o.0.solver_cost).sum::<f64>() / n);
            res.pg.insert("solver".into(), 1.0);
            res.mec_pct_split.insert("solver".into(), outcomes.iter().map(|o| o.0.solver_mec_pct).sum::<f64>() / n);
            let names: Vec<String> = outcomes.first().map(|o| o.0.policy_cost.keys().cloned().collect()).unwrap_or_default();
            for name in names {
                let mean = |f: &dyn Fn(&RunOutcome) -> f64| outcomes.iter().map(|o| f(&o.0)).sum::<f64>() / n;
                res.cost.insert(name.clone(), mean(&|o| o.policy_cost[&name]));
                res.pg.insert(name.clone(), mean(&|o| performance_gain(o.solver_cost, o.policy_cost[&name])));
                res.mec_pct_split.insert(name.clone(), mean(&|o| o.policy_mec_pct[&name]));
                res.repaired.insert(name.clone(), outcomes.iter().map(|o| o.0.policy_repaired[&name]).sum());
            }
            results.push(res);
        }
    }
    let mut timing = Vec::new();
    if let Some(gcn) = predictors.get(&ModelKind::Gcn) {
        for &n_tasks in &cfg.timing_task_counts {
            let spec = RunSpec { n_tasks, ..RunSpec::default() };
            let runs = (0..cfg.timing_runs)
                .map(|r| generate_run(&spec.with_seed(derive_seed(cfg.seed ^ 0x7131, r as u64)), &aps))
                .collect::<Result<Vec<_>, _>>()?;
            timing.push(timing_bench(&runs, split, &cfg.q, &cfg.solver, gcn)?);
        }
    }
    Ok(SuiteResult { config: cfg.clone(), results, timing })
}

const POLICY_COLUMNS: [&str; 3] = ["gnn", "mlp", "dt"];

fn csv_file(dir: &Path, name: &str, comment: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), EvalError> {
    let mut buf = Vec::new();
    writeln!(buf, "# {comment}")?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(std::io::Error::other)?;
        for r in rows {
            w.write_record(r).map_err(std::io::Error::other)?;
        }
        w.flush()?;
    }
    crate::write_atomic(&dir.join(name), &buf)?;
    Ok(())
}

fn fmt_opt(v: Option<&f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Writes one CSV per figure into `dir`. The first line of each is a `#`
/// comment holding the suite configuration as JSON.
pub fn write_figure_csvs(suite: &SuiteResult, dir: &Path, provenance: &serde_json::Value) -> Result<Vec<String>, EvalError> {
    std::fs::create_dir_all(dir)?;
    let comment = serde_json::json!({ "suite": suite.config, "provenance": provenance }).to_string();
    let strict: Vec<&ExperimentResult> = suite.results.iter().filter(|r| r.scenario == "strict").collect();
    let mut written = Vec::new();

    let rows: Vec<Vec<String>> = suite
        .timing
        .iter()
        .map(|t| {
            vec![
                t.n_tasks.to_string(),
                t.runs.to_string(),
                t.solver_median_s.to_string(),
                t.inference_median_s.to_string(),
                t.ratio.map_or_else(String::new, |r| r.to_string()),
            ]
        })
        .collect();
    csv_file(dir, "fig4_timing.csv", &comment, &["n_tasks", "runs", "solver_median_s", "inference_median_s", "ratio"], &rows)?;
    written.push("fig4_timing.csv".to_string());

    let rows: Vec<Vec<String>> = strict
        .iter()
        .map(|r| {
            let mut row = vec![r.rate.to_string()];
            row.extend(POLICY_COLUMNS.iter().map(|p| fmt_opt(r.pg.get(*p))));
            row.push(fmt_opt(r.pg.get("meconly")));
            row
        })
        .collect();
    csv_file(dir, "fig5_pg.csv", &comment, &["rate", "pg_gnn", "pg_mlp", "pg_dt", "pg_meconly"], &rows)?;
    written.push("fig5_pg.csv".to_string());

    let rows: Vec<Vec<String>> = strict
        .iter()
        .map(|r| {
            let mut row = vec![r.rate.to_string(), fmt_opt(r.mec_pct_split.get("solver"))];
            row.extend(POLICY_COLUMNS.iter().map(|p| fmt_opt(r.mec_pct_split.get(*p))));
            row
        })
        .collect();
    csv_file(
        dir,
        "fig6_mec_split.csv",
        &comment,
        &["rate", "mec_pct_solver", "mec_pct_gnn", "mec_pct_mlp", "mec_pct_dt"],
        &rows,
    )?;
    written.push("fig6_mec_split.csv".to_string());

    let rows: Vec<Vec<String>> = strict
        .iter()
        .map(|r| {
            vec![
                r.rate.to_string(),
                r.mec_pct_nosplit.to_string(),
                fmt_opt(r.mec_pct_split.get("solver")),
                r.nosplit_timeouts.to_string(),
            ]
        })
        .collect();
    csv_file(dir, "fig7_mec_nosplit.csv", &comment, &["rate", "mec_pct_nosplit", "mec_pct_split", "nosplit_timeouts"], &rows)?;
    written.push("fig7_mec_nosplit.csv".to_string());

    let rows: Vec<Vec<String>> = suite
        .results
        .iter()
        .map(|r| {
            let mut row = vec![r.rate.to_string(), r.scenario.clone(), fmt_opt(r.cost.get("solver"))];
            row.extend(POLICY_COLUMNS.iter().map(|p| fmt_opt(r.cost.get(*p))));
            row
        })
        .collect();
    csv_file(
        dir,
        "fig8_network_cost.csv",
        &comment,
        &["rate", "scenario", "cost_solver", "cost_gnn", "cost_mlp", "cost_dt"],
        &rows,
    )?;
    written.push("fig8_network_cost.csv".to_string());
    Ok(written)
}
