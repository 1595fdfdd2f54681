//! Cross-validated training of the three classifiers.
//!
//! Folds partition runs, never tasks within a run, so a validation graph is
//! always seen whole. Features are standardized with statistics of the
//! training folds. Neural models take one Adam step per training run per
//! epoch and keep the parameters with the lowest validation loss.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::{AdamConfig, AdamState};
use super::dense::{Matrix, ShapeError};
use super::gcn::{gcn_backward, gcn_forward, gcn_loss, GcnParams};
use super::mlp::{mlp_backward, mlp_forward, MlpParams};
use super::tree::{dt_fit, dt_predict, TreeError, TreeModel, DEFAULT_MAX_DEPTH};
use crate::dataset::{
    build_graph, derive_seed, kfold_split, Dataset, DatasetError, EdgeRule, FoldPlan, RunSlice, Standardizer,
    TaskGraph,
};
use crate::par;
use crate::topology::{DecisionCatalog, NodeId};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training samples")]
    EmptyDataset,
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gcn,
    Mlp,
    Dt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gcn, ModelKind::Mlp, ModelKind::Dt];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Mlp => "mlp",
            ModelKind::Dt => "dt",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gcn" | "gnn" => Ok(ModelKind::Gcn),
            "mlp" => Ok(ModelKind::Mlp),
            "dt" => Ok(ModelKind::Dt),
            _ => Err(format!("unknown model {s:?} (expected gcn|mlp|dt)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// GCN embedding width.
    pub delta: usize,
    /// Add each node's own embedding to its aggregated neighbourhood.
    pub self_term: bool,
    pub edge_rule: EdgeRule,
    pub mlp_hidden: Vec<usize>,
    pub dt_max_depth: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            adam: AdamConfig::default(),
            seed: 0,
            delta: 32,
            self_term: true,
            edge_rule: EdgeRule::SameAp,
            mlp_hidden: vec![32, 32],
            dt_max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Gcn(GcnParams),
    Mlp(MlpParams),
    Dt(TreeModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Gcn(_) => ModelKind::Gcn,
            TrainedModel::Mlp(_) => ModelKind::Mlp,
            TrainedModel::Dt(_) => ModelKind::Dt,
        }
    }
}

/// A trained model with the feature scaling it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub model: TrainedModel,
    pub scaler: Standardizer,
    pub edge_rule: EdgeRule,
}

impl Predictor {
    /// Labels for one run's raw feature rows. `labels` is only read by the
    /// label-derived edge rule.
    pub fn predict_run(
        &self,
        raw: &Matrix,
        aps: &[NodeId],
        labels: Option<&[usize]>,
        catalog: &DecisionCatalog,
    ) -> Result<Vec<usize>, TrainError> {
        let mut x = raw.clone();
        self.scaler.apply(&mut x);
        Ok(match &self.model {
            TrainedModel::Gcn(p) => {
                let g = build_graph(x, aps, self.edge_rule, labels, catalog)?;
                gcn_forward(p, &g)?.argmax_rows()
            }
            TrainedModel::Mlp(p) => mlp_forward(p, &x)?.argmax_rows(),
            TrainedModel::Dt(t) => dt_predict(t, &x),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub fold: usize,
    pub predictor: Predictor,
    /// 1-based epoch whose parameters were kept; 0 for the tree.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    /// Dataset rows of the validation runs and the model's labels for them.
    pub val_rows: Vec<usize>,
    pub val_pred: Vec<usize>,
    pub val_accuracy: f64,
    pub train_seconds: f64,
}

/// Fold plan over the dataset's runs.
pub fn run_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, TrainError> {
    if k < 2 {
        return Err(TrainError::TooFewFolds(k));
    }
    Ok(kfold_split(ds.runs().len(), k, seed)?)
}

struct FoldData {
    train: Vec<(TaskGraph, Vec<usize>)>,
    val: Vec<(TaskGraph, Vec<usize>)>,
    val_rows: Vec<usize>,
    scaler: Standardizer,
}

fn fold_data(ds: &Dataset, runs: &[RunSlice], plan: &FoldPlan, t: usize, rule: EdgeRule) -> Result<FoldData, TrainError> {
    let train_runs = plan.train_indices(t);
    let dim = ds.header.n_features;
    let rows = train_runs.iter().flat_map(|&r| runs[r].rows.iter().map(|&i| &ds.samples[i].features[..]));
    let scaler = Standardizer::fit(rows, dim);
    let build = |idx: &[usize]| -> Result<Vec<(TaskGraph, Vec<usize>)>, TrainError> {
        idx.iter()
            .filter(|&&r| !runs[r].rows.is_empty())
            .map(|&r| {
                let g = ds.graph(&runs[r], rule, &scaler)?;
                let y = ds.labels(&runs[r].rows);
                Ok((g, y))
            })
            .collect()
    };
    let train = build(&train_runs)?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let val = build(&plan.folds[t])?;
    let val_rows = plan.folds[t].iter().flat_map(|&r| runs[r].rows.iter().copied()).collect();
    Ok(FoldData { train, val, val_rows, scaler })
}

fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Shared epoch loop for the neural models.
fn fit_neural<P: super::adam::ParamSet + Clone>(
    mut params: P,
    data: &FoldData,
    cfg: &TrainConfig,
    seed: u64,
    step: impl Fn(&P, &TaskGraph, &[usize]) -> Result<(f64, P), ShapeError>,
    probs: impl Fn(&P, &TaskGraph) -> Result<Matrix, ShapeError>,
) -> Result<(P, usize, Vec<EpochRecord>, Vec<usize>), TrainError> {
    let mut adam = AdamState::new(&params, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, P, Vec<usize>)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut n) = (0.0, 0usize);
        for &i in &order {
            let (g, y) = &data.train[i];
            let (loss, grad) = step(&params, g, y)?;
            adam.step(&mut params, &grad, cfg.learning_rate)?;
            loss_sum += loss * y.len() as f64;
            n += y.len();
        }
        let (mut vloss, mut vn) = (0.0, 0usize);
        let mut pred = Vec::with_capacity(data.val_rows.len());
        let mut truth = Vec::with_capacity(data.val_rows.len());
        for (g, y) in &data.val {
            let p = probs(&params, g)?;
            vloss += gcn_loss(&p, y) * y.len() as f64;
            vn += y.len();
            pred.extend(p.argmax_rows());
            truth.extend_from_slice(y);
        }
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / n.max(1) as f64,
            val_loss: if vn == 0 { f64::NAN } else { vloss / vn as f64 },
            val_accuracy: accuracy(&pred, &truth),
        };
        history.push(rec);
        let better = match &best {
            None => true,
            Some((l, ..)) => rec.val_loss < *l || (l.is_nan() && !rec.val_loss.is_nan()),
        };
        if better {
            best = Some((rec.val_loss, epoch, params.clone(), pred));
        }
    }
    let (_, epoch, p, pred) = best.expect("at least one epoch");
    Ok((p, epoch, history, pred))
}

/// Trains one model on every fold but `t` and validates on fold `t`.
pub fn train_fold(
    ds: &Dataset,
    plan: &FoldPlan,
    t: usize,
    kind: ModelKind,
    cfg: &TrainConfig,
) -> Result<FoldModel, TrainError> {
    let start = Instant::now();
    let runs = ds.runs();
    let data = fold_data(ds, &runs, plan, t, cfg.edge_rule)?;
    let (f, k) = (ds.header.n_features, ds.n_classes());
    let seed = derive_seed(cfg.seed, t as u64);
    let truth: Vec<usize> = ds.labels(&data.val_rows);
    let (model, best_epoch, history, val_pred) = match kind {
        ModelKind::Gcn => {
            let p = GcnParams::init(f, cfg.delta, k, cfg.self_term, seed);
            let (p, e, h, pred) = fit_neural(p, &data, cfg, seed ^ 1, |p, g, y| gcn_backward(p, g, y), gcn_forward)?;
            (TrainedModel::Gcn(p), e, h, pred)
        }
        ModelKind::Mlp => {
            let mut dims = vec![f];
            dims.extend(&cfg.mlp_hidden);
            dims.push(k);
            let p = MlpParams::init(&dims, seed);
            let (p, e, h, pred) = fit_neural(
                p,
                &data,
                cfg,
                seed ^ 1,
                |p, g, y| mlp_backward(p, &g.features, y),
                |p, g| mlp_forward(p, &g.features),
            )?;
            (TrainedModel::Mlp(p), e, h, pred)
        }
        ModelKind::Dt => {
            let x = stack(data.train.iter().map(|(g, _)| &g.features), f);
            let y: Vec<usize> = data.train.iter().flat_map(|(_, y)| y.iter().copied()).collect();
            let tree = dt_fit(&x, &y, k, cfg.dt_max_depth)?;
            let pred: Vec<usize> = data.val.iter().flat_map(|(g, _)| dt_predict(&tree, &g.features)).collect();
            let train_acc = accuracy(&dt_predict(&tree, &x), &y);
            let rec = EpochRecord { epoch: 1, train_loss: 1.0 - train_acc, val_loss: f64::NAN, val_accuracy: accuracy(&pred, &truth) };
            (TrainedModel::Dt(tree), 0, vec![rec], pred)
        }
    };
    Ok(FoldModel {
        fold: t,
        predictor: Predictor { model, scaler: data.scaler, edge_rule: cfg.edge_rule },
        best_epoch,
        history,
        val_accuracy: accuracy(&val_pred, &truth),
        val_rows: data.val_rows,
        val_pred,
        train_seconds: start.elapsed().as_secs_f64(),
    })
}

fn stack<'a>(parts: impl Iterator<Item = &'a Matrix>, cols: usize) -> Matrix {
    let mut data = Vec::new();
    let mut rows = 0;
    for m in parts {
        data.extend_from_slice(&m.data);
        rows += m.rows;
    }
    Matrix { rows, cols, data }
}

/// Trains `kind` on every fold of `plan`; folds run in parallel.
pub fn cross_validate(
    ds: &Dataset,
    plan: &FoldPlan,
    kind: ModelKind,
    cfg: &TrainConfig,
) -> Result<Vec<FoldModel>, TrainError> {
    par::map_range(plan.k, |t| train_fold(ds, plan, t, kind, cfg)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
