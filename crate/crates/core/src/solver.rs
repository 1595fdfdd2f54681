//! Exact placement: a depth-first branch and bound over tasks, and an
//! exhaustive oracle for small instances.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{
    feasible, network_cost, reference_po, service_rate, system_cost, Assignment, Network, QueuingParams,
};
use crate::par;
use crate::topology::Decision;
use crate::workload::TaskRequest;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("brute force limited to {max} tasks, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("solution is not proven optimal ({0:?})")]
    NotOptimal(SolveStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Among equal-cost optima, the first one met in the search order.
    DecisionIndexOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub time_limit_s: f64,
    pub brute_force_max_tasks: usize,
    pub tie_break: TieBreak,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { time_limit_s: 60.0, brute_force_max_tasks: 8, tie_break: TieBreak::DecisionIndexOrder }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimedOut,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes_explored: u64,
    pub pruned: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub assignment: Assignment,
    pub cost: f64,
    pub optimal: bool,
    pub status: SolveStatus,
    pub stats: SolverStats,
}

impl Solution {
    fn finish(run: &[TaskRequest], net: &Network, assignment: Assignment, status: SolveStatus, stats: SolverStats) -> Solution {
        let cost = system_cost(run, &assignment, &net.hops).unwrap_or(f64::NAN);
        Solution { assignment, cost, optimal: status == SolveStatus::Optimal, status, stats }
    }

    /// Catalog label per task, `None` where unassigned.
    pub fn labels(&self, net: &Network) -> Vec<Option<usize>> {
        self.assignment.choice.iter().map(|d| d.and_then(|d| net.catalog.index_of(&d))).collect()
    }
}

/// Enumerates every assignment in lexicographic label order and keeps the
/// first one of minimum cost that passes the full constraint check.
pub fn brute_force(
    run: &[TaskRequest],
    net: &Network,
    q: &QueuingParams,
    cfg: &SolverConfig,
) -> Result<Solution, SolverError> {
    if run.len() > cfg.brute_force_max_tasks {
        return Err(SolverError::TooLarge { n: run.len(), max: cfg.brute_force_max_tasks });
    }
    let start = Instant::now();
    let m = net.catalog.len();
    let n = run.len();
    let mut stats = SolverStats::default();
    if n == 0 {
        stats.wall_time_s = start.elapsed().as_secs_f64();
        return Ok(Solution::finish(run, net, Assignment::empty(0), SolveStatus::Optimal, stats));
    }
    if m == 0 {
        stats.wall_time_s = start.elapsed().as_secs_f64();
        return Ok(Solution::finish(run, net, Assignment::empty(n), SolveStatus::Infeasible, stats));
    }
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Assignment)> = None;
    loop {
        stats.nodes_explored += 1;
        let a = Assignment::from_labels(&labels, &net.catalog);
        if feasible(run, &a, net, q).is_feasible() {
            if let Ok(c) = system_cost(run, &a, &net.hops) {
                if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                    best = Some((c, a));
                }
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                stats.wall_time_s = start.elapsed().as_secs_f64();
                return Ok(match best {
                    Some((_, a)) => Solution::finish(run, net, a, SolveStatus::Optimal, stats),
                    None => Solution::finish(run, net, Assignment::empty(n), SolveStatus::Infeasible, stats),
                });
            }
            i -= 1;
            labels[i] += 1;
            if labels[i] < m {
                break;
            }
            labels[i] = 0;
        }
    }
}

/// Flattened instance data for the search.
struct Instance {
    m: usize,
    mu: Vec<f64>,
    is_fo: Vec<bool>,
    /// Tasks in branching order: loosest deadline first.
    order: Vec<usize>,
    alpha: Vec<f64>,
    deadline: Vec<f64>,
    /// `cost[k * m + e]`, infinite where the decision is unusable.
    cost: Vec<f64>,
    /// Per task, decisions sorted by (cost, label).
    prefs: Vec<Vec<usize>>,
    ref_po: Vec<Option<usize>>,
}

impl Instance {
    fn new(run: &[TaskRequest], net: &Network, q: &QueuingParams) -> Instance {
        let decisions = &net.catalog.decisions;
        let m = decisions.len();
        let mu: Vec<f64> = decisions
            .iter()
            .map(|d| service_rate(d, q, &net.topology).unwrap_or(0.0))
            .collect();
        let is_fo = decisions.iter().map(Decision::is_fo).collect();
        let mut cost = Vec::with_capacity(run.len() * m);
        let mut prefs = Vec::with_capacity(run.len());
        let mut ref_po = Vec::with_capacity(run.len());
        for k in run {
            let row: Vec<f64> = decisions
                .iter()
                .enumerate()
                .map(|(e, d)| match network_cost(k, d, &net.hops) {
                    Ok(c) if mu[e] > 0.0 => c,
                    _ => f64::INFINITY,
                })
                .collect();
            let mut p: Vec<usize> = (0..m).filter(|&e| row[e].is_finite()).collect();
            p.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            prefs.push(p);
            cost.extend(row);
            ref_po.push(reference_po(k, net).and_then(|d| net.catalog.index_of(&d)));
        }
        Instance {
            m,
            mu,
            is_fo,
            order: branching_order(run),
            alpha: run.iter().map(|k| k.arrival_rate).collect(),
            deadline: run.iter().map(|k| k.deadline_s).collect(),
            cost,
            prefs,
            ref_po,
        }
    }

    fn cost(&self, k: usize, e: usize) -> f64 {
        self.cost[k * self.m + e]
    }
}

/// Order in which the search fixes tasks: descending deadline, then task id.
pub fn branching_order(run: &[TaskRequest]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..run.len()).collect();
    order.sort_by(|&a, &b| run[b].deadline_s.total_cmp(&run[a].deadline_s).then(run[a].task_id.cmp(&run[b].task_id)));
    order
}

/// Loads, member counts and tightest member deadline per decision queue.
#[derive(Clone)]
struct QueueState {
    load: Vec<f64>,
    count: Vec<usize>,
    dmin: Vec<f64>,
}

impl QueueState {
    fn new(m: usize) -> QueueState {
        QueueState { load: vec![0.0; m], count: vec![0; m], dmin: vec![f64::INFINITY; m] }
    }

    /// Whether task `k` can join queue `e` without breaking stability or
    /// any member's deadline. Both only get harder as a queue grows.
    fn admits(&self, inst: &Instance, k: usize, e: usize) -> bool {
        let slack = inst.mu[e] - self.load[e] - inst.alpha[k];
        slack > 0.0 && 1.0 / slack <= self.dmin[e].min(inst.deadline[k])
    }

    fn push(&mut self, inst: &Instance, k: usize, e: usize) -> (f64, f64) {
        let old = (self.load[e], self.dmin[e]);
        self.load[e] += inst.alpha[k];
        self.count[e] += 1;
        self.dmin[e] = old.1.min(inst.deadline[k]);
        old
    }

    fn pop(&mut self, e: usize, old: (f64, f64)) {
        self.load[e] = old.0;
        self.count[e] -= 1;
        self.dmin[e] = old.1;
    }
}

/// Largest number of members queue `e` can ever hold in this run.
fn max_members(inst: &Instance, e: usize, alpha_lb: f64, d_max: f64) -> usize {
    let mut c = 0;
    loop {
        let slack = inst.mu[e] - (c + 1) as f64 * alpha_lb;
        if slack <= 0.0 || 1.0 / slack > d_max * (1.0 + 1e-12) || c + 1 > inst.order.len() {
            return c;
        }
        c += 1;
    }
}

/// Queues whose occupancy is tracked exactly by the bound, with the table of
/// optimal completion costs for the group's tasks.
///
/// Tasks are fixed loosest-first, so a task joining a queue is its tightest
/// member and only the member count matters: the completion cost of the
/// group is a function of (tasks fixed so far, counts). Decisions outside the
/// group are treated as uncapacitated at the task's cheapest outside cost.
struct Group {
    queues: Vec<usize>,
    radix: Vec<usize>,
    stride: Vec<usize>,
    states: usize,
    /// Number of group tasks among `order[..d]`, for every depth `d`.
    before: Vec<usize>,
    table: Vec<f64>,
}

impl Group {
    fn state_of(&self, st: &QueueState) -> usize {
        self.queues
            .iter()
            .zip(&self.radix)
            .zip(&self.stride)
            .map(|((&e, &r), &s)| st.count[e].min(r - 1) * s)
            .sum()
    }
}

const MAX_GROUP_STATES: usize = 200_000;
const MAX_TABLE_ENTRIES: usize = 20_000_000;

struct Bound {
    groups: Vec<Group>,
    /// Cheapest cost outside the tracked queues, per task.
    escape: Vec<f64>,
    group_of: Vec<Option<usize>>,
}

impl Bound {
    fn new(inst: &Instance) -> Bound {
        let n = inst.order.len();
        let m = inst.m;
        let alpha_lb = inst.alpha.iter().copied().fold(f64::INFINITY, f64::min);
        let d_max = inst.deadline.iter().copied().fold(0.0, f64::max);
        let cap: Vec<usize> = (0..m).map(|e| max_members(inst, e, alpha_lb, d_max)).collect();
        let mut tracked = vec![true; m];
        loop {
            let escape: Vec<f64> = (0..n)
                .map(|k| (0..m).filter(|&e| !tracked[e]).map(|e| inst.cost(k, e)).fold(f64::INFINITY, f64::min))
                .collect();
            let linked = |k: usize, e: usize| tracked[e] && inst.cost(k, e) < escape[k];
            let mut parent: Vec<usize> = (0..m).collect();
            for k in 0..n {
                let mut first = None;
                for e in (0..m).filter(|&e| linked(k, e)) {
                    match first {
                        None => first = Some(e),
                        Some(f) => {
                            let (a, b) = (find(&mut parent, f), find(&mut parent, e));
                            parent[a] = b;
                        }
                    }
                }
            }
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
            for e in (0..m).filter(|&e| tracked[e]) {
                let r = find(&mut parent, e);
                members[r].push(e);
            }
            let mut task_group: Vec<Option<usize>> = vec![None; n];
            let mut group_tasks: Vec<usize> = vec![0; m];
            for k in 0..n {
                if let Some(e) = (0..m).find(|&e| linked(k, e)) {
                    let r = find(&mut parent, e);
                    task_group[k] = Some(r);
                    group_tasks[r] += 1;
                }
            }
            let size = |r: usize| members[r].iter().fold(1usize, |p, &e| p.saturating_mul(cap[e] + 1));
            let oversized = (0..m).find(|&r| group_tasks[r] > 0 && size(r) > MAX_GROUP_STATES);
            let total: usize = (0..m)
                .filter(|&r| group_tasks[r] > 0)
                .fold(0usize, |t, r| t.saturating_add(size(r).saturating_mul(group_tasks[r] + 1)));
            let victim = match oversized {
                Some(r) => Some(r),
                None if total > MAX_TABLE_ENTRIES => (0..m).filter(|&r| group_tasks[r] > 0).max_by_key(|&r| size(r)),
                None => None,
            };
            if let Some(r) = victim {
                let e = *members[r].iter().max_by_key(|&&e| (cap[e], e)).expect("group has queues");
                tracked[e] = false;
                continue;
            }

            let mut groups = Vec::new();
            let mut group_of = vec![None; n];
            for r in (0..m).filter(|&r| group_tasks[r] > 0) {
                let queues = members[r].clone();
                let radix: Vec<usize> = queues.iter().map(|&e| cap[e] + 1).collect();
                let mut stride = vec![1; queues.len()];
                for p in 1..queues.len() {
                    stride[p] = stride[p - 1] * radix[p - 1];
                }
                let states = size(r);
                let tasks: Vec<usize> = inst.order.iter().copied().filter(|&k| task_group[k] == Some(r)).collect();
                let mut before = Vec::with_capacity(n + 1);
                let mut seen = 0;
                before.push(0);
                for &k in &inst.order {
                    if task_group[k] == Some(r) {
                        seen += 1;
                    }
                    before.push(seen);
                }
                let mut table = vec![0.0; (tasks.len() + 1) * states];
                for (i, &k) in tasks.iter().enumerate().rev() {
                    let options: Vec<(usize, f64)> = queues
                        .iter()
                        .enumerate()
                        .filter(|&(_, &e)| linked(k, e))
                        .map(|(p, &e)| (p, inst.cost(k, e)))
                        .collect();
                    let (cur, next) = table.split_at_mut((i + 1) * states);
                    let cur = &mut cur[i * states..];
                    for s in 0..states {
                        let mut best = escape[k] + next[s];
                        for &(p, c) in &options {
                            let count = (s / stride[p]) % radix[p];
                            if count + 1 >= radix[p] {
                                continue;
                            }
                            let slack = inst.mu[queues[p]] - count as f64 * alpha_lb - inst.alpha[k];
                            if slack <= 0.0 || 1.0 / slack > inst.deadline[k] * (1.0 + 1e-12) {
                                continue;
                            }
                            best = best.min(c + next[s + stride[p]]);
                        }
                        cur[s] = best;
                    }
                }
                for &k in &tasks {
                    group_of[k] = Some(groups.len());
                }
                groups.push(Group { queues, radix, stride, states, before, table });
            }
            return Bound { groups, escape, group_of };
        }
    }

    /// Whether the remaining tasks can still fit by count. Queue `e` can take
    /// `(slack_e - 1/d) / α` more members whose tightest deadline is `d`.
    /// Filling queues by descending slack, each with the tightest tasks not
    /// yet covered and fractional counts allowed, covers at least as much as
    /// any feasible placement.
    fn fits(&self, inst: &Instance, st: &QueueState, depth: usize, slack: &mut Vec<f64>) -> bool {
        let rest = &inst.order[depth..];
        let r = rest.len();
        if r == 0 {
            return true;
        }
        let alpha = rest.iter().map(|&k| inst.alpha[k]).fold(f64::INFINITY, f64::min);
        slack.clear();
        slack.extend((0..inst.m).map(|e| inst.mu[e] - st.load[e]));
        slack.sort_by(|a, b| b.total_cmp(a));
        let mut x = 0.0f64;
        for &s in slack.iter() {
            let i = x.floor() as usize;
            if i >= r {
                return true;
            }
            let d = inst.deadline[rest[r - 1 - i]];
            x += ((s - 1.0 / d) / alpha).max(0.0) + 1e-9;
        }
        x >= r as f64 - 1e-6
    }

    /// Lower bound on the cost of fixing `order[depth..]` from `st`.
    fn eval(&self, inst: &Instance, st: &QueueState, depth: usize) -> f64 {
        let mut scratch = Vec::with_capacity(inst.m);
        if !self.fits(inst, st, depth, &mut scratch) {
            return f64::INFINITY;
        }
        let mut total = 0.0;
        for &k in &inst.order[depth..] {
            let Some(&e) = inst.prefs[k].iter().find(|&&e| st.admits(inst, k, e)) else {
                return f64::INFINITY;
            };
            if self.group_of[k].is_none() {
                total += inst.cost(k, e).max(self.escape[k]);
            }
        }
        for g in &self.groups {
            let i = g.before[depth];
            total += g.table[i * g.states + g.state_of(st)];
        }
        total
    }
}

const MAX_ORDER_DP_QUEUES: usize = 16;

/// Whether `order[depth..]` can fit by count, every task at the smallest
/// remaining arrival rate. A queue taking new members whose tightest
/// deadline is `d` has room for `(slack - 1/min(d, dmin)) / α` of them. Some
/// order of the queues, each taking a block of the tightest tasks not yet
/// covered, reproduces any feasible placement's counts, so the search over
/// orders (a subset DP on the furthest position reached) is exact for this
/// relaxation. Queues with no room even for the loosest remaining task are
/// left out; with too many queues left the check passes.
fn counts_fit(inst: &Instance, st: &QueueState, depth: usize) -> bool {
    let rest = &inst.order[depth..];
    let r = rest.len();
    if r == 0 {
        return true;
    }
    let alpha = rest.iter().map(|&k| inst.alpha[k]).fold(f64::INFINITY, f64::min);
    let tight: Vec<f64> = rest.iter().rev().map(|&k| inst.deadline[k]).collect();
    let take = |e: usize, pos: usize| -> usize {
        let room = (inst.mu[e] - st.load[e] - 1.0 / tight[pos].min(st.dmin[e])) / alpha;
        if room < 0.0 {
            0
        } else {
            (room * (1.0 + 1e-12) + 1e-9).floor() as usize
        }
    };
    let active: Vec<usize> = (0..inst.m).filter(|&e| take(e, r - 1) > 0).collect();
    let m = active.len();
    if m > MAX_ORDER_DP_QUEUES {
        return true;
    }
    let mut best = vec![0usize; 1 << m];
    for mask in 0..(1usize << m) {
        let pos = best[mask];
        if pos >= r {
            return true;
        }
        for (i, &e) in active.iter().enumerate() {
            if mask & (1 << i) == 0 {
                let next = &mut best[mask | (1 << i)];
                *next = (*next).max(pos + take(e, pos));
            }
        }
    }
    best[(1 << m) - 1] >= r
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

struct Search<'a> {
    inst: &'a Instance,
    bound: &'a Bound,
    state: QueueState,
    choice: Vec<usize>,
    incumbent: Option<(f64, Vec<usize>)>,
    stats: SolverStats,
    deadline: Instant,
    timed_out: bool,
}

impl Search<'_> {
    fn tolerance(&self, inc: f64) -> f64 {
        1e-9 * inc.abs().max(1.0)
    }

    /// Delay-order check for every full offload of a complete assignment.
    fn delay_order_ok(&self) -> bool {
        let inst = self.inst;
        for (k, &e) in self.choice.iter().enumerate() {
            if !inst.is_fo[e] {
                continue;
            }
            let Some(p) = inst.ref_po[k] else { continue };
            let po_slack = inst.mu[p] - self.state.load[p];
            if po_slack <= 0.0 {
                continue;
            }
            let fo_delay = 1.0 / (inst.mu[e] - self.state.load[e]);
            if fo_delay > 1.0 / po_slack {
                return false;
            }
        }
        true
    }

    fn dfs(&mut self, depth: usize, acc: f64) {
        if self.timed_out {
            return;
        }
        if self.stats.nodes_explored % 256 == 0 && Instant::now() >= self.deadline {
            self.timed_out = true;
            return;
        }
        let inst = self.inst;
        if depth == inst.order.len() {
            if !self.delay_order_ok() {
                return;
            }
            let better = match &self.incumbent {
                None => true,
                Some((inc, _)) => acc < inc - self.tolerance(*inc),
            };
            if better {
                self.incumbent = Some((acc, self.choice.clone()));
            }
            return;
        }
        if depth > 0 && !counts_fit(inst, &self.state, depth) {
            self.stats.pruned += 1;
            return;
        }
        let k = inst.order[depth];
        // Children ranked by their lower bound, then cost and label.
        let mut children: Vec<(f64, usize)> = Vec::with_capacity(inst.prefs[k].len());
        for &e in &inst.prefs[k] {
            if !self.state.admits(inst, k, e) {
                self.stats.pruned += 1;
                continue;
            }
            let old = self.state.push(inst, k, e);
            let lb = acc + inst.cost(k, e) + self.bound.eval(inst, &self.state, depth + 1);
            self.state.pop(e, old);
            if lb.is_finite() {
                children.push((lb, e));
            } else {
                self.stats.pruned += 1;
            }
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (lb, e) in children {
            if let Some((inc, _)) = self.incumbent {
                if lb >= inc - self.tolerance(inc) {
                    self.stats.pruned += 1;
                    continue;
                }
            }
            let old = self.state.push(inst, k, e);
            self.choice[k] = e;
            self.stats.nodes_explored += 1;
            self.dfs(depth + 1, acc + inst.cost(k, e));
            self.state.pop(e, old);
            if self.timed_out {
                return;
            }
        }
    }
}

/// Lower bound used by the search for completing a run after the first
/// `prefix.len()` tasks in [`branching_order`] are fixed to the given labels.
/// Infinite when the prefix itself breaks a queue constraint.
pub fn completion_lower_bound(run: &[TaskRequest], net: &Network, q: &QueuingParams, prefix: &[usize]) -> f64 {
    let inst = Instance::new(run, net, q);
    let bound = Bound::new(&inst);
    let mut st = QueueState::new(inst.m);
    for (&k, &e) in inst.order.iter().zip(prefix) {
        if !inst.cost(k, e).is_finite() || !st.admits(&inst, k, e) {
            return f64::INFINITY;
        }
        st.push(&inst, k, e);
    }
    bound.eval(&inst, &st, prefix.len().min(inst.order.len()))
}

/// Exact minimum-cost placement under all constraints.
pub fn branch_and_bound(run: &[TaskRequest], net: &Network, q: &QueuingParams, cfg: &SolverConfig) -> Solution {
    let start = Instant::now();
    let n = run.len();
    let inst = Instance::new(run, net, q);
    let bound = Bound::new(&inst);
    let limit = std::time::Duration::from_secs_f64(cfg.time_limit_s.max(0.0));
    let mut search = Search {
        inst: &inst,
        bound: &bound,
        state: QueueState::new(inst.m),
        choice: vec![0; n],
        incumbent: None,
        stats: SolverStats::default(),
        deadline: start + limit,
        timed_out: false,
    };
    if n > 0 && counts_fit(&inst, &search.state, 0) && bound.eval(&inst, &search.state, 0).is_finite() {
        search.dfs(0, 0.0);
    }
    let mut stats = search.stats;
    stats.wall_time_s = start.elapsed().as_secs_f64();
    let status = match (&search.incumbent, search.timed_out) {
        (_, false) if n == 0 => SolveStatus::Optimal,
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
        (_, true) => SolveStatus::TimedOut,
    };
    let assignment = match &search.incumbent {
        Some((_, labels)) => Assignment::from_labels(labels, &net.catalog),
        None => Assignment::empty(n),
    };
    Solution::finish(run, net, assignment, status, stats)
}

/// Solves independent runs, in parallel when the feature is enabled.
pub fn solve_runs(runs: &[Vec<TaskRequest>], net: &Network, q: &QueuingParams, cfg: &SolverConfig) -> Vec<Solution> {
    par::map(runs, |run| branch_and_bound(run, net, q, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLabel {
    pub task_id: u32,
    pub label: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedTask {
    pub task_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLabels {
    /// Labels in task-id order.
    pub labels: Vec<TaskLabel>,
    pub excluded: Vec<ExcludedTask>,
    pub solution: Solution,
    /// The tasks that were solved, aligned with `solution.assignment`.
    pub solved: Vec<TaskRequest>,
}

/// Reason a task cannot be placed even on an otherwise idle network.
pub fn standalone_infeasibility(k: &TaskRequest, net: &Network, q: &QueuingParams) -> Option<String> {
    let single = [*k];
    let ok = net.catalog.decisions.iter().any(|d| {
        feasible(&single, &Assignment::from_decisions([*d]), net, q).is_feasible()
    });
    if ok {
        None
    } else {
        Some(format!(
            "no decision meets the {:.1} ms deadline at {} req/s on an idle network",
            k.deadline_s * 1e3,
            k.arrival_rate
        ))
    }
}

/// Optimal labels for one run. Tasks that no decision can serve alone are
/// left out with a reason; the rest must be solved to proven optimality.
pub fn label_run(
    run: &[TaskRequest],
    net: &Network,
    q: &QueuingParams,
    cfg: &SolverConfig,
) -> Result<RunLabels, SolverError> {
    let mut excluded = Vec::new();
    let mut solved = Vec::new();
    for k in run {
        match standalone_infeasibility(k, net, q) {
            Some(reason) => excluded.push(ExcludedTask { task_id: k.task_id, reason }),
            None => solved.push(*k),
        }
    }
    let solution = branch_and_bound(&solved, net, q, cfg);
    labels_from_solution(solved, excluded, solution, net)
}

pub fn labels_from_solution(
    solved: Vec<TaskRequest>,
    excluded: Vec<ExcludedTask>,
    solution: Solution,
    net: &Network,
) -> Result<RunLabels, SolverError> {
    if !solution.optimal {
        return Err(SolverError::NotOptimal(solution.status));
    }
    let mut labels: Vec<TaskLabel> = solved
        .iter()
        .zip(&solution.assignment.choice)
        .filter_map(|(k, d)| {
            let d = (*d)?;
            Some(TaskLabel {
                task_id: k.task_id,
                label: net.catalog.index_of(&d)?,
                cost: network_cost(k, &d, &net.hops).ok()?,
            })
        })
        .collect();
    labels.sort_by_key(|l| l.task_id);
    Ok(RunLabels { labels, excluded, solution, solved })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{SplitMode, Topology};
    use crate::workload::{generate_run, RunSpec};

    fn task(id: u32, ap: u32, deadline_s: f64) -> TaskRequest {
        TaskRequest { task_id: id, ap, size_mb: 10.0, workload_cycles: 1e7, deadline_s, arrival_rate: 10.0 }
    }

    fn reference_q() -> QueuingParams {
        QueuingParams { f_bar: 1e7 }
    }

    #[test]
    fn single_task_prefers_partial_offload() {
        let net = Network::default_split();
        let cfg = SolverConfig::default();
        let s = brute_force(&[task(0, 13, 0.1)], &net, &reference_q(), &cfg).unwrap();
        assert!(s.optimal);
        assert_eq!(s.cost, 200.0);
        assert_eq!(s.assignment.choice[0], Some(Decision::Po { c0: 0, c1: 8 }));
        let b = branch_and_bound(&[task(0, 13, 0.1)], &net, &reference_q(), &cfg);
        assert_eq!(b.assignment, s.assignment);
    }

    #[test]
    fn impossible_deadline() {
        let net = Network::default_split();
        let cfg = SolverConfig::default();
        let s = brute_force(&[task(0, 13, 0.0005)], &net, &reference_q(), &cfg).unwrap();
        assert!(!s.optimal);
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert_eq!(s.assignment.choice, vec![None]);
        let b = branch_and_bound(&[task(0, 13, 0.0005)], &net, &reference_q(), &cfg);
        assert_eq!(b.status, SolveStatus::Infeasible);
    }

    #[test]
    fn empty_runs() {
        let net = Network::default_split();
        let cfg = SolverConfig::default();
        let s = brute_force(&[], &net, &reference_q(), &cfg).unwrap();
        assert!(s.optimal && s.cost == 0.0 && s.assignment.choice.is_empty());
        let b = branch_and_bound(&[], &net, &reference_q(), &cfg);
        assert!(b.optimal && b.cost == 0.0 && b.stats.nodes_explored == 0);
    }

    #[test]
    fn brute_force_size_limit() {
        let net = Network::default_split();
        let run: Vec<_> = (0..9).map(|i| task(i, 13, 0.1)).collect();
        assert_eq!(
            brute_force(&run, &net, &reference_q(), &SolverConfig::default()),
            Err(SolverError::TooLarge { n: 9, max: 8 })
        );
    }

    #[test]
    fn matches_brute_force_on_crowded_access_point() {
        // Six tasks on one AP saturate the local pair and spill over.
        let net = Network::default_split();
        let q = QueuingParams { f_bar: 2.5e7 };
        let cfg = SolverConfig::default();
        let run: Vec<_> = [0.15, 0.02, 0.08, 0.05, 0.03, 0.12].iter().enumerate().map(|(i, &d)| task(i as u32, 13, d)).collect();
        let s = brute_force(&run, &net, &q, &cfg).unwrap();
        let b = branch_and_bound(&run, &net, &q, &cfg);
        assert!(s.optimal && b.optimal);
        assert_eq!(s.cost, b.cost);
        assert!(feasible(&run, &b.assignment, &net, &q).is_feasible());
    }

    #[test]
    fn default_run_solves_quickly() {
        let net = Network::default_split();
        let q = QueuingParams::default();
        let run = generate_run(&RunSpec::default().with_seed(3), &net.topology.access_points()).unwrap();
        let s = branch_and_bound(&run, &net, &q, &SolverConfig::default());
        assert!(s.optimal, "{:?}", s.stats);
        assert!(feasible(&run, &s.assignment, &net, &q).is_feasible());
    }

    #[test]
    fn label_lookup_and_exclusion() {
        let net = Network::default_split();
        let run = vec![task(0, 13, 0.1), task(1, 14, 0.0001), task(2, 15, 0.1)];
        let out = label_run(&run, &net, &reference_q(), &SolverConfig::default()).unwrap();
        let ids: Vec<_> = out.labels.iter().map(|l| (l.task_id, l.label)).collect();
        assert_eq!(ids, vec![(0, 0), (2, 2)]);
        assert_eq!(out.excluded.len(), 1);
        assert_eq!(out.excluded[0].task_id, 1);
    }

    #[test]
    fn not_optimal_labels_rejected() {
        let net = Network::default_split();
        let cfg = SolverConfig { time_limit_s: 0.0, ..SolverConfig::default() };
        let run = generate_run(&RunSpec::default(), &net.topology.access_points()).unwrap();
        assert!(matches!(label_run(&run, &net, &QueuingParams::default(), &cfg), Err(SolverError::NotOptimal(_))));
    }

    #[test]
    fn nosplit_catalog_solves() {
        let net = Network::new(Topology::build_default(), SplitMode::NoSplit).unwrap();
        let q = QueuingParams::default();
        let run = generate_run(&RunSpec::default().with_seed(5), &net.topology.access_points()).unwrap();
        let s = branch_and_bound(&run, &net, &q, &SolverConfig::default());
        assert!(s.optimal, "{:?}", s.stats);
    }
}
