//! Synthetic runs of rendering-task requests.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::NodeId;

/// Tasks per run at desk scale: 1,375,000 samples over 5,000 runs.
pub const DEFAULT_TASKS_PER_RUN: usize = 275;
pub const DEFAULT_SIZE_MB: f64 = 10.0;
pub const DEFAULT_WORKLOAD_CYCLES: f64 = 1e7;
pub const DEFAULT_ARRIVAL_RATE: f64 = 10.0;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid run spec: {0}")]
    InvalidSpec(String),
    #[error("unknown scenario {0:?} (expected strict|relaxed)")]
    UnknownScenario(String),
    #[error("run csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub task_id: u32,
    pub ap: NodeId,
    pub size_mb: f64,
    pub workload_cycles: f64,
    pub deadline_s: f64,
    pub arrival_rate: f64,
}

/// A parameter that is either fixed or drawn uniformly per task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Const(f64),
    Range { lo: f64, hi: f64 },
}

impl Param {
    fn valid(&self) -> bool {
        match *self {
            Param::Const(v) => v.is_finite() && v > 0.0,
            Param::Range { lo, hi } => lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Param::Const(v) => v,
            Param::Range { lo, hi } => lo + rng.gen::<f64>() * (hi - lo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub n_tasks: usize,
    pub deadline_range_s: (f64, f64),
    pub size_mb: Param,
    pub workload_cycles: Param,
    pub arrival_rate: Param,
    pub seed: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            n_tasks: DEFAULT_TASKS_PER_RUN,
            deadline_range_s: STRICT_DEADLINES,
            size_mb: Param::Const(DEFAULT_SIZE_MB),
            workload_cycles: Param::Const(DEFAULT_WORKLOAD_CYCLES),
            arrival_rate: Param::Const(DEFAULT_ARRIVAL_RATE),
            seed: 0,
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.n_tasks == 0 {
            return Err(WorkloadError::InvalidSpec("n_tasks must be at least 1".into()));
        }
        let (lo, hi) = self.deadline_range_s;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(WorkloadError::InvalidSpec(format!("deadline range [{lo}, {hi}]")));
        }
        for (name, p) in [
            ("size_mb", self.size_mb),
            ("workload_cycles", self.workload_cycles),
            ("arrival_rate", self.arrival_rate),
        ] {
            if !p.valid() {
                return Err(WorkloadError::InvalidSpec(format!("{name} = {p:?}")));
            }
        }
        Ok(())
    }

    /// Same spec with a different seed.
    pub fn with_seed(&self, seed: u64) -> RunSpec {
        RunSpec { seed, ..self.clone() }
    }
}

pub const STRICT_DEADLINES: (f64, f64) = (0.010, 0.150);
pub const RELAXED_DEADLINES: (f64, f64) = (0.050, 0.150);

/// Deadline range for a named scenario.
pub fn scenario_params(name: &str) -> Result<(f64, f64), WorkloadError> {
    match name {
        "strict" => Ok(STRICT_DEADLINES),
        "relaxed" => Ok(RELAXED_DEADLINES),
        other => Err(WorkloadError::UnknownScenario(other.to_string())),
    }
}

/// Draws one run. Every task consumes the same random draws in the same
/// order regardless of which parameters are constant, so runs that differ
/// only in one constant stay paired task by task.
pub fn generate_run(spec: &RunSpec, aps: &[NodeId]) -> Result<Vec<TaskRequest>, WorkloadError> {
    spec.validate()?;
    if aps.is_empty() {
        return Err(WorkloadError::InvalidSpec("topology has no access points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.deadline_range_s;
    let tasks = (0..spec.n_tasks)
        .map(|i| {
            let u: f64 = rng.gen();
            let ap = aps[rng.gen_range(0..aps.len())];
            let mut sub = ChaCha8Rng::seed_from_u64(rng.gen());
            TaskRequest {
                task_id: i as u32,
                ap,
                deadline_s: lo + u * (hi - lo),
                size_mb: spec.size_mb.draw(&mut sub),
                workload_cycles: spec.workload_cycles.draw(&mut sub),
                arrival_rate: spec.arrival_rate.draw(&mut sub),
            }
        })
        .collect();
    Ok(tasks)
}

/// One run per arrival rate; every other field is identical across runs.
pub fn rate_sweep(
    spec: &RunSpec,
    rates: &[f64],
    aps: &[NodeId],
) -> Result<Vec<Vec<TaskRequest>>, WorkloadError> {
    if rates.is_empty() {
        return Err(WorkloadError::InvalidSpec("empty rate sweep".into()));
    }
    rates
        .iter()
        .map(|&rate| {
            let s = RunSpec { arrival_rate: Param::Const(rate), ..spec.clone() };
            generate_run(&s, aps)
        })
        .collect()
}

pub fn write_run_csv<W: Write>(run: &[TaskRequest], out: W) -> Result<(), WorkloadError> {
    let mut w = csv::Writer::from_writer(out);
    for t in run {
        w.serialize(t)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_run_csv<R: Read>(input: R) -> Result<Vec<TaskRequest>, WorkloadError> {
    let mut r = csv::Reader::from_reader(input);
    let run: Result<Vec<TaskRequest>, _> = r.deserialize().collect();
    let run = run?;
    for t in &run {
        let ok = [t.size_mb, t.workload_cycles, t.deadline_s, t.arrival_rate]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return Err(WorkloadError::InvalidSpec(format!("task {} has a non-positive field", t.task_id)));
        }
    }
    Ok(run)
}
