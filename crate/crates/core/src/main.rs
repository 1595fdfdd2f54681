use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use coin_placer::cost_model::{feasible, Network, QueuingParams, DEFAULT_F_BAR};
use coin_placer::dataset::{generate_dataset, Dataset, DatasetConfig, DatasetError, EdgeRule};
use coin_placer::eval::{self, EvalError, SuiteConfig};
use coin_placer::models::store::{self, StoreError};
use coin_placer::models::train::{cross_validate, run_folds, ModelKind, TrainConfig, TrainError};
use coin_placer::solver::{branch_and_bound, SolverConfig, SolverError};
use coin_placer::topology::{SplitMode, Topology, TopologyError};
use coin_placer::workload::{
    generate_run, read_run_csv, scenario_params, Param, RunSpec, DEFAULT_ARRIVAL_RATE, DEFAULT_TASKS_PER_RUN,
};
use coin_placer::{par, write_atomic};

const PAPER_SCALE_RUNS: usize = 5000;

#[derive(Parser)]
#[command(name = "coin-placer", version, about = "Rendering-task placement: simulator, exact solver, learned placement")]
struct Cli {
    /// Worker threads for runs and folds.
    #[arg(long, global = true, env = "COIN_PLACER_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the built-in topology, or validate and normalize a custom one.
    GenTopology(GenTopologyArgs),
    /// Generate runs, solve each exactly and write features with labels.
    GenDataset(GenDatasetArgs),
    /// Solve one run exactly.
    Solve(SolveArgs),
    /// Cross-validate a model on a dataset and save one model per fold.
    Train(TrainArgs),
    /// Score saved fold models on their validation runs.
    Evaluate(EvaluateArgs),
    /// Time the exact solver against feature construction plus GCN inference.
    Bench(BenchArgs),
    /// Run the request-rate experiments and write per-figure CSVs.
    ExportPlots(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Split,
    Nosplit,
}

impl From<ModeArg> for SplitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Split => SplitMode::Split,
            ModeArg::Nosplit => SplitMode::NoSplit,
        }
    }
}

#[derive(Args, Clone)]
struct NetArgs {
    /// Topology JSON file; the built-in topology when omitted.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "split")]
    mode: ModeArg,
    /// Cycles per request used to turn capacity into a service rate.
    #[arg(long, default_value_t = DEFAULT_F_BAR)]
    f_bar: f64,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Per-run solver time limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = DEFAULT_TASKS_PER_RUN)]
    tasks: usize,
    /// Deadline scenario: strict or relaxed.
    #[arg(long, default_value = "strict")]
    scenario: String,
    /// Requests per second of every task.
    #[arg(long, default_value_t = DEFAULT_ARRIVAL_RATE)]
    rate: f64,
}

#[derive(Args)]
struct GenTopologyArgs {
    /// Emit the built-in topology.
    #[arg(long, conflicts_with = "from")]
    default: bool,
    /// Validate this topology file instead.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenDatasetArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    /// Use the full-scale run count.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write a JSON generation report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Task CSV to solve; a generated run when omitted.
    #[arg(long)]
    tasks_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gcn,
    Mlp,
    Dt,
    All,
}

impl ModelArg {
    fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelArg::Gcn => vec![ModelKind::Gcn],
            ModelArg::Mlp => vec![ModelKind::Mlp],
            ModelArg::Dt => vec![ModelKind::Dt],
            ModelArg::All => ModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    model: ModelArg,
    /// Number of folds.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// GCN embedding width.
    #[arg(long, default_value_t = 32)]
    delta: usize,
    #[arg(long, value_delimiter = ',', default_value = "32,32")]
    mlp_hidden: Vec<usize>,
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    /// Connected nodes aggregate neighbours only, without their own embedding.
    #[arg(long)]
    literal_aggregation: bool,
    #[arg(long, default_value = "same-ap")]
    edge_rule: EdgeRule,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "models")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "models")]
    models: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    model: ModelArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "models")]
    models: PathBuf,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[arg(long, value_delimiter = ',', default_value = "50,150,275")]
    tasks: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_F_BAR)]
    f_bar: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "models")]
    models: PathBuf,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,12")]
    rates: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    runs_per_rate: usize,
    #[arg(long, default_value_t = DEFAULT_TASKS_PER_RUN)]
    tasks: usize,
    #[arg(long, value_delimiter = ',', default_value = "50,150,275")]
    timing_tasks: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    timing_runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "plots")]
    out_dir: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String),
    SolverBudget(String),
    Missing(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Failed(_) => 1,
            CliError::Validation(_) => 2,
            CliError::SolverBudget(_) => 3,
            CliError::Missing(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Validation(m)
            | CliError::SolverBudget(m)
            | CliError::Missing(m)
            | CliError::Failed(m) => m,
        }
    }
}

impl From<TopologyError> for CliError {
    fn from(e: TopologyError) -> Self {
        match e {
            TopologyError::Invalid(vs) => {
                CliError::Validation(vs.iter().map(|v| format!("invalid topology: {v}")).collect::<Vec<_>>().join("\n"))
            }
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Solver { source: SolverError::NotOptimal(_), .. } => CliError::SolverBudget(e.to_string()),
            DatasetError::Workload(_) | DatasetError::TooFewSamples { .. } => CliError::Usage(e.to_string()),
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Missing(_) => CliError::Missing(e.to_string()),
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::TooFewFolds(_) | TrainError::Dataset(DatasetError::TooFewSamples { .. }) => {
                CliError::Usage(e.to_string())
            }
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::MissingArtifact(_) => CliError::Missing(e.to_string()),
            EvalError::Solver(SolverError::NotOptimal(_)) => CliError::SolverBudget(e.to_string()),
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => println!("{text}"),
    }
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

fn load_topology(path: Option<&Path>) -> Result<Topology, CliError> {
    match path {
        None => Ok(Topology::build_default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Missing(format!("{}: {e}", p.display())))?;
            Ok(Topology::from_json(&text)?)
        }
    }
}

fn network(net: &NetArgs) -> Result<(Network, QueuingParams), CliError> {
    if !(net.f_bar.is_finite() && net.f_bar > 0.0) {
        return Err(CliError::Usage(format!("--f-bar must be positive, got {}", net.f_bar)));
    }
    let t = load_topology(net.topology.as_deref())?;
    Ok((Network::new(t, net.mode.into())?, QueuingParams { f_bar: net.f_bar }))
}

fn run_spec(run: &RunArgs, seed: u64) -> Result<RunSpec, CliError> {
    let deadline_range_s = scenario_params(&run.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    let spec =
        RunSpec { n_tasks: run.tasks, deadline_range_s, arrival_rate: Param::Const(run.rate), seed, ..RunSpec::default() };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn solver_config(s: &SolverArgs) -> Result<SolverConfig, CliError> {
    if s.time_limit.is_nan() || s.time_limit < 0.0 {
        return Err(CliError::Usage(format!("--time-limit must be non-negative, got {}", s.time_limit)));
    }
    Ok(SolverConfig { time_limit_s: s.time_limit, ..SolverConfig::default() })
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))?;
    Dataset::read(std::io::BufReader::new(f)).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn gen_topology(a: GenTopologyArgs) -> CliResult {
    let t = match &a.from {
        Some(p) => load_topology(Some(p))?,
        None => Topology::build_default(),
    };
    emit(a.out.as_deref(), &t.to_json())
}

fn gen_dataset(a: GenDatasetArgs) -> CliResult {
    let runs = if a.paper_scale { PAPER_SCALE_RUNS } else { a.runs };
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let (net, q) = network(&a.net)?;
    let cfg = DatasetConfig {
        runs,
        spec: run_spec(&a.run, 0)?,
        mode: a.net.mode.into(),
        q,
        solver: solver_config(&a.solver)?,
        seed: a.seed,
    };
    let (mut ds, report) = generate_dataset(&cfg, &net)?;
    ds.header.config = json!({ "generation": cfg, "topology": net.topology });
    let mut buf = Vec::new();
    ds.write(&mut buf).map_err(|e| CliError::Failed(e.to_string()))?;
    write_atomic(&a.out, &buf)?;
    eprintln!(
        "{} samples from {} runs ({} tasks excluded as infeasible alone), {:.1}% on the MEC",
        report.samples, report.runs, report.excluded_tasks, report.mec_offload_pct
    );
    if let Some(p) = &a.report {
        emit(Some(p), &pretty(&json!({ "config": cfg, "report": report })))?;
    }
    Ok(())
}

fn solve(a: SolveArgs) -> CliResult {
    let (net, q) = network(&a.net)?;
    let cfg = solver_config(&a.solver)?;
    let run = match &a.tasks_file {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(|e| CliError::Missing(format!("{}: {e}", p.display())))?;
            read_run_csv(f).map_err(|e| CliError::Validation(e.to_string()))?
        }
        None => generate_run(&run_spec(&a.run, a.seed)?, &net.topology.access_points())
            .map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let sol = branch_and_bound(&run, &net, &q, &cfg);
    if run.len() > 0 && !sol.optimal && sol.status != coin_placer::solver::SolveStatus::Infeasible {
        return Err(CliError::SolverBudget(format!("no proven optimum within {} s", cfg.time_limit_s)));
    }
    let report = feasible(&run, &sol.assignment, &net, &q);
    let out = json!({
        "config": { "solver": cfg, "q": q, "mode": SplitMode::from(a.net.mode), "seed": a.seed,
                    "tasks_file": a.tasks_file, "run": if a.tasks_file.is_none() { Some(run_spec(&a.run, a.seed)?) } else { None } },
        "status": sol.status,
        "cost": sol.cost,
        "labels": sol.labels(&net),
        "mec_offload_pct": eval::mec_offload_pct(&sol.assignment),
        "feasible": report.is_feasible(),
        "stats": sol.stats,
    });
    emit(a.out.as_deref(), &pretty(&out))
}

fn train(a: TrainArgs) -> CliResult {
    let ds = read_dataset(&a.dataset)?;
    if a.epochs == 0 || !(a.lr > 0.0) || a.delta == 0 {
        return Err(CliError::Usage("--epochs, --lr and --delta must be positive".into()));
    }
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        seed: a.seed,
        delta: a.delta,
        self_term: !a.literal_aggregation,
        edge_rule: a.edge_rule,
        mlp_hidden: a.mlp_hidden.clone(),
        dt_max_depth: a.max_depth,
        ..TrainConfig::default()
    };
    let plan = run_folds(&ds, a.k, a.seed)?;
    store::save_fold_plan(&a.out_dir, &plan)?;
    for kind in a.model.kinds() {
        let folds = cross_validate(&ds, &plan, kind, &cfg)?;
        let m = store::save_cross_validation(&a.out_dir, kind, &cfg, ds.header.config.clone(), &folds)?;
        eprintln!("{kind}: mean validation accuracy {:.4} over {} folds", m.mean_val_accuracy(), m.folds.len());
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    let ds = read_dataset(&a.dataset)?;
    let plan = store::load_fold_plan(&a.models)?;
    let runs = ds.runs();
    if plan.folds.iter().flatten().any(|&r| r >= runs.len()) {
        return Err(CliError::Validation("fold plan does not match the dataset's runs".into()));
    }
    let mut per_model = BTreeMap::new();
    for kind in a.model.kinds() {
        let manifest = store::load_manifest(&a.models, kind)?;
        let mut folds = Vec::new();
        let (mut all_pred, mut all_true) = (Vec::new(), Vec::new());
        for t in 0..plan.k {
            let p = store::load_predictor(&a.models, kind, t)?;
            let (mut pred, mut truth) = (Vec::new(), Vec::new());
            for &r in &plan.folds[t] {
                let rows = &runs[r].rows;
                let x = ds.feature_matrix(rows);
                let aps: Vec<_> = rows.iter().map(|&i| ds.samples[i].ap).collect();
                let y = ds.labels(rows);
                pred.extend(p.predict_run(&x, &aps, Some(&y), &ds.header.catalog).map_err(EvalError::from)?);
                truth.extend(y);
            }
            folds.push(json!({ "fold": t, "metrics": eval::metrics(&pred, &truth, ds.n_classes())? }));
            all_pred.extend(pred);
            all_true.extend(truth);
        }
        let cm = eval::ConfusionMatrix::new(&all_pred, &all_true, ds.n_classes())?;
        per_model.insert(
            kind.name(),
            json!({
                "train": manifest.train,
                "folds": folds,
                "pooled": eval::MetricsReport::from_confusion(&cm),
                "confusion": cm,
            }),
        );
    }
    let out = json!({ "dataset": ds.header.config, "fold_plan": plan, "models": per_model });
    emit(a.out.as_deref(), &pretty(&out))
}

fn bench(a: BenchArgs) -> CliResult {
    let (net, q) = network(&a.net)?;
    let cfg = solver_config(&a.solver)?;
    let p = store::load_predictor(&a.models, ModelKind::Gcn, a.fold)?;
    let aps = net.topology.access_points();
    let mut reports = Vec::new();
    for &n in &a.tasks {
        let spec = RunSpec { n_tasks: n.max(1), ..RunSpec::default() };
        let runs: Vec<_> = if n == 0 {
            vec![Vec::new(); a.runs]
        } else {
            (0..a.runs)
                .map(|r| generate_run(&spec.with_seed(coin_placer::dataset::derive_seed(a.seed, r as u64)), &aps))
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Usage(e.to_string()))?
        };
        let t = eval::timing_bench(&runs, &net, &q, &cfg, &p)?;
        eprintln!(
            "{n} tasks: solver {:.3} ms, inference {:.3} ms, ratio {}",
            1e3 * t.solver_median_s,
            1e3 * t.inference_median_s,
            t.ratio.map_or("n/a".into(), |r| format!("{r:.1}"))
        );
        reports.push(t);
    }
    let out = json!({ "config": { "solver": cfg, "q": q, "seed": a.seed, "runs": a.runs, "fold": a.fold }, "timing": reports });
    emit(a.out.as_deref(), &pretty(&out))
}

fn export_plots(a: ExportArgs) -> CliResult {
    let mut predictors = BTreeMap::new();
    let mut accuracy = BTreeMap::new();
    for kind in ModelKind::ALL {
        predictors.insert(kind, store::load_predictor(&a.models, kind, a.fold)?);
        if let Ok(m) = store::load_manifest(&a.models, kind) {
            accuracy.insert(kind.name(), m.mean_val_accuracy());
        }
    }
    let t = load_topology(a.topology.as_deref())?;
    let split = Network::new(t.clone(), SplitMode::Split)?;
    let nosplit = Network::new(t, SplitMode::NoSplit)?;
    if a.rates.is_empty() || a.rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(CliError::Usage("--rates must be positive numbers".into()));
    }
    let cfg = SuiteConfig {
        rates: a.rates.clone(),
        runs_per_rate: a.runs_per_rate,
        n_tasks: a.tasks,
        timing_task_counts: a.timing_tasks.clone(),
        timing_runs: a.timing_runs,
        q: QueuingParams { f_bar: a.f_bar },
        solver: solver_config(&a.solver)?,
        seed: a.seed,
    };
    let suite = eval::experiment_suite(&cfg, &split, &nosplit, &predictors)?;
    let provenance = json!({ "models": a.models, "fold": a.fold });
    let files = eval::write_figure_csvs(&suite, &a.out_dir, &provenance)?;
    let summary = json!({ "suite": suite, "provenance": provenance, "mean_val_accuracy": accuracy });
    write_atomic(&a.out_dir.join("summary.json"), pretty(&summary).as_bytes())?;
    eprintln!("wrote {} and summary.json to {}", files.join(", "), a.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = par::with_jobs(cli.jobs, move || match cli.command {
        Command::GenTopology(a) => gen_topology(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::Solve(a) => solve(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bench(a) => bench(a),
        Command::ExportPlots(a) => export_plots(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
