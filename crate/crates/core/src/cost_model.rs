//! Execution time, M/M/1 queueing delay, network cost and the placement
//! constraints evaluated over a full assignment.
//!
//! Every decision is its own queue: a partial offload pools the capacities
//! of its two COINs and serves the tasks assigned to that pair, a full
//! offload is served by the MEC, a single-node decision by its COIN.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Decision, DecisionCatalog, HopMatrix, NodeId, SplitMode, Topology, TopologyError};
use crate::workload::TaskRequest;

/// Default per-task computing allocation, in CPU cycles.
pub const DEFAULT_F_BAR: f64 = 5e6;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("queue is unstable (arrival rate reaches the service rate)")]
    Unstable,
}

impl From<TopologyError> for CostError {
    fn from(e: TopologyError) -> Self {
        match e {
            TopologyError::UnknownNode(n) => CostError::UnknownNode(n),
            TopologyError::DisconnectedGraph(a, _) => CostError::UnknownNode(a),
            _ => CostError::UnknownNode(NodeId::MAX),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueuingParams {
    /// Average computing allocation per task (cycles).
    pub f_bar: f64,
}

impl Default for QueuingParams {
    fn default() -> Self {
        QueuingParams { f_bar: DEFAULT_F_BAR }
    }
}

/// Topology, hop distances and decision catalog bundled together.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: Topology,
    pub hops: HopMatrix,
    pub catalog: DecisionCatalog,
}

impl Network {
    pub fn new(topology: Topology, mode: SplitMode) -> Result<Network, TopologyError> {
        let violations = topology.validate();
        if !violations.is_empty() {
            return Err(TopologyError::Invalid(violations));
        }
        let hops = HopMatrix::new(&topology)?;
        let catalog = DecisionCatalog::build(&topology, mode);
        Ok(Network { topology, hops, catalog })
    }

    pub fn with_catalog(topology: Topology, catalog: DecisionCatalog) -> Result<Network, TopologyError> {
        let hops = HopMatrix::new(&topology)?;
        Ok(Network { topology, hops, catalog })
    }

    pub fn default_split() -> Network {
        Network::new(Topology::build_default(), SplitMode::Split).expect("default topology is valid")
    }

    pub fn default_nosplit() -> Network {
        Network::new(Topology::build_default(), SplitMode::NoSplit).expect("default topology is valid")
    }
}

/// Pooled capacity of a decision's executor, in cycles per second.
pub fn pooled_capacity(d: &Decision, t: &Topology) -> Result<f64, CostError> {
    d.nodes()
        .into_iter()
        .map(|n| t.capacity(n).ok_or(CostError::UnknownNode(n)))
        .sum()
}

/// Pure execution time of task `k` under decision `d`.
pub fn exec_time(d: &Decision, k: &TaskRequest, t: &Topology) -> Result<f64, CostError> {
    Ok(k.workload_cycles / pooled_capacity(d, t)?)
}

/// Service rate of a decision's queue, in tasks per second.
pub fn service_rate(d: &Decision, q: &QueuingParams, t: &Topology) -> Result<f64, CostError> {
    Ok(pooled_capacity(d, t)? / q.f_bar)
}

/// Per-task decision for one run, aligned with the run's task order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub choice: Vec<Option<Decision>>,
}

impl Assignment {
    pub fn empty(n: usize) -> Assignment {
        Assignment { choice: vec![None; n] }
    }

    pub fn from_decisions(ds: impl IntoIterator<Item = Decision>) -> Assignment {
        Assignment { choice: ds.into_iter().map(Some).collect() }
    }

    pub fn from_labels(labels: &[usize], catalog: &DecisionCatalog) -> Assignment {
        Assignment { choice: labels.iter().map(|&l| catalog.get(l)).collect() }
    }
}

/// Aggregate arrival rates: per node (each task counted at every node it
/// uses) and per decision queue.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadTable {
    pub node: BTreeMap<NodeId, f64>,
    pub executor: BTreeMap<Decision, f64>,
}

impl LoadTable {
    pub fn node_load(&self, n: NodeId) -> f64 {
        self.node.get(&n).copied().unwrap_or(0.0)
    }

    pub fn executor_load(&self, d: &Decision) -> f64 {
        self.executor.get(d).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, d: &Decision, rate: f64) {
        *self.executor.entry(*d).or_insert(0.0) += rate;
        for n in d.nodes() {
            *self.node.entry(n).or_insert(0.0) += rate;
        }
    }

    /// Like [`LoadTable::add`], but a partial offload's arrivals are shared
    /// between its nodes in proportion to capacity, which is how the work is
    /// split when both halves finish together.
    pub fn add_work_share(&mut self, d: &Decision, rate: f64, t: &Topology) -> Result<(), CostError> {
        let total = pooled_capacity(d, t)?;
        *self.executor.entry(*d).or_insert(0.0) += rate;
        for n in d.nodes() {
            let cap = t.capacity(n).ok_or(CostError::UnknownNode(n))?;
            *self.node.entry(n).or_insert(0.0) += rate * cap / total;
        }
        Ok(())
    }
}

pub fn node_load(run: &[TaskRequest], a: &Assignment) -> LoadTable {
    let mut loads = LoadTable::default();
    for (k, d) in run.iter().zip(&a.choice) {
        if let Some(d) = d {
            loads.add(d, k.arrival_rate);
        }
    }
    loads
}

/// M/M/1 sojourn time of the queue behind `d`: 1 / (service rate - load).
pub fn queue_delay(
    d: &Decision,
    loads: &LoadTable,
    q: &QueuingParams,
    t: &Topology,
) -> Result<f64, CostError> {
    let slack = service_rate(d, q, t)? - loads.executor_load(d);
    if slack > 0.0 {
        Ok(1.0 / slack)
    } else {
        Err(CostError::Unstable)
    }
}

pub fn deadline_ok(
    d: &Decision,
    k: &TaskRequest,
    loads: &LoadTable,
    q: &QueuingParams,
    t: &Topology,
) -> bool {
    matches!(queue_delay(d, loads, q, t), Ok(delay) if delay <= k.deadline_s)
}

/// Transfer volume of task `k` under `d`, in MB * hops / s.
pub fn network_cost(k: &TaskRequest, d: &Decision, hops: &HopMatrix) -> Result<f64, CostError> {
    let h = match *d {
        Decision::Po { c0, c1 } => hops.get(k.ap, c0)? + hops.get(c0, c1)?,
        Decision::Fo { e } => hops.get(k.ap, e)?,
        Decision::Single { c } => hops.get(k.ap, c)?,
    };
    Ok(k.arrival_rate * k.size_mb * h as f64)
}

/// Sum of per-task network costs; unassigned tasks contribute nothing.
pub fn system_cost(run: &[TaskRequest], a: &Assignment, hops: &HopMatrix) -> Result<f64, CostError> {
    let mut total = 0.0;
    for (k, d) in run.iter().zip(&a.choice) {
        if let Some(d) = d {
            total += network_cost(k, d, hops)?;
        }
    }
    Ok(total)
}

/// The partial-offload alternative a full offload is compared against: the
/// catalog's cheapest PO decision for this task (lowest label on ties).
pub fn reference_po(k: &TaskRequest, net: &Network) -> Option<Decision> {
    let mut best: Option<(f64, Decision)> = None;
    for d in net.catalog.decisions.iter().filter(|d| d.is_po()) {
        let Ok(c) = network_cost(k, d, &net.hops) else { continue };
        if best.is_none_or(|(bc, _)| c < bc) {
            best = Some((c, *d));
        }
    }
    best.map(|(_, d)| d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum ConstraintViolation {
    /// Task has no decision.
    Unassigned { task_id: u32 },
    /// Full offload is slower than the task's partial-offload alternative.
    DelayOrder { task_id: u32, fo_delay_s: f64, po_delay_s: f64 },
    /// Queueing delay exceeds the task's deadline.
    Deadline { task_id: u32, delay_s: f64, deadline_s: f64 },
    /// Arrival rate reaches the service rate of a used queue.
    Stability { decision: Decision, load: f64, service_rate: f64 },
    UnknownNode { node: NodeId },
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintViolation::Unassigned { task_id } => write!(f, "task {task_id} has no decision"),
            ConstraintViolation::DelayOrder { task_id, fo_delay_s, po_delay_s } => write!(
                f,
                "task {task_id}: full offload delay {fo_delay_s:.6}s exceeds partial offload delay {po_delay_s:.6}s"
            ),
            ConstraintViolation::Deadline { task_id, delay_s, deadline_s } => {
                write!(f, "task {task_id}: delay {delay_s:.6}s exceeds deadline {deadline_s:.6}s")
            }
            ConstraintViolation::Stability { decision, load, service_rate } => {
                write!(f, "{decision}: load {load} req/s reaches service rate {service_rate} req/s")
            }
            ConstraintViolation::UnknownNode { node } => write!(f, "unknown node {node}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub violations: Vec<ConstraintViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every placement constraint over a full assignment.
pub fn feasible(run: &[TaskRequest], a: &Assignment, net: &Network, q: &QueuingParams) -> FeasibilityReport {
    let t = &net.topology;
    let mut violations = Vec::new();
    let loads = node_load(run, a);
    for (d, &load) in &loads.executor {
        match service_rate(d, q, t) {
            Ok(mu) if mu - load > 0.0 => {}
            Ok(mu) => violations.push(ConstraintViolation::Stability { decision: *d, load, service_rate: mu }),
            Err(CostError::UnknownNode(node)) => violations.push(ConstraintViolation::UnknownNode { node }),
            Err(_) => {}
        }
    }
    for (k, d) in run.iter().zip(&a.choice) {
        let Some(d) = d else {
            violations.push(ConstraintViolation::Unassigned { task_id: k.task_id });
            continue;
        };
        let Ok(delay) = queue_delay(d, &loads, q, t) else { continue };
        if delay > k.deadline_s {
            violations.push(ConstraintViolation::Deadline {
                task_id: k.task_id,
                delay_s: delay,
                deadline_s: k.deadline_s,
            });
        }
        if d.is_fo() {
            if let Some(po) = reference_po(k, net) {
                // An unstable PO queue is infinitely slow, so any stable FO wins.
                if let Ok(po_delay) = queue_delay(&po, &loads, q, t) {
                    if delay > po_delay {
                        violations.push(ConstraintViolation::DelayOrder {
                            task_id: k.task_id,
                            fo_delay_s: delay,
                            po_delay_s: po_delay,
                        });
                    }
                }
            }
        }
    }
    FeasibilityReport { violations }
}
