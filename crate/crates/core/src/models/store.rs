//! On-disk layout of trained models.
//!
//! ```text
//! <dir>/folds.json              fold plan over runs
//! <dir>/<kind>/manifest.json    config, per-fold history and scores
//! <dir>/gcn/fold_00.ckpt        binary GCN checkpoint
//! <dir>/mlp/fold_00.json        MLP or tree predictor as JSON
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::gcn::{read_checkpoint, write_checkpoint};
use super::train::{EpochRecord, FoldModel, ModelKind, Predictor, TrainConfig, TrainedModel};
use super::CheckpointError;
use crate::dataset::{EdgeRule, FoldPlan, Standardizer};
use crate::write_atomic;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("missing artifact: {}", .0.display())]
    Missing(PathBuf),
    #[error("{}: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub train_seconds: f64,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ModelKind,
    pub edge_rule: EdgeRule,
    pub train: TrainConfig,
    /// Generation settings of the training dataset.
    pub dataset: serde_json::Value,
    pub folds: Vec<FoldSummary>,
}

impl Manifest {
    pub fn mean_val_accuracy(&self) -> f64 {
        if self.folds.is_empty() {
            return 0.0;
        }
        self.folds.iter().map(|f| f.val_accuracy).sum::<f64>() / self.folds.len() as f64
    }
}

pub fn model_path(dir: &Path, kind: ModelKind, fold: usize) -> PathBuf {
    let ext = if kind == ModelKind::Gcn { "ckpt" } else { "json" };
    dir.join(kind.name()).join(format!("fold_{fold:02}.{ext}"))
}

fn corrupt(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Corrupt { path: path.to_path_buf(), reason: e.to_string() }
}

fn read(path: &Path) -> Result<Vec<u8>, StoreError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => StoreError::Missing(path.to_path_buf()),
        _ => StoreError::Io(e),
    })
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), StoreError> {
    let text = serde_json::to_vec_pretty(v).map_err(|e| corrupt(path, e))?;
    write_atomic(path, &text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    serde_json::from_slice(&read(path)?).map_err(|e| corrupt(path, e))
}

pub fn save_fold_plan(dir: &Path, plan: &FoldPlan) -> Result<(), StoreError> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("folds.json"), plan)
}

pub fn load_fold_plan(dir: &Path) -> Result<FoldPlan, StoreError> {
    read_json(&dir.join("folds.json"))
}

pub fn save_predictor(dir: &Path, fold: usize, p: &Predictor) -> Result<PathBuf, StoreError> {
    let kind = p.model.kind();
    let path = model_path(dir, kind, fold);
    std::fs::create_dir_all(path.parent().expect("model path has a parent"))?;
    match &p.model {
        TrainedModel::Gcn(params) => {
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, params, Some(&p.scaler))?;
            write_atomic(&path, &buf)?;
        }
        _ => write_json(&path, p)?,
    }
    Ok(path)
}

pub fn load_predictor(dir: &Path, kind: ModelKind, fold: usize) -> Result<Predictor, StoreError> {
    let path = model_path(dir, kind, fold);
    if kind != ModelKind::Gcn {
        return read_json(&path);
    }
    let bytes = read(&path)?;
    let (params, scaler) = read_checkpoint(&mut &bytes[..]).map_err(|e: CheckpointError| corrupt(&path, e))?;
    let edge_rule = load_manifest(dir, kind).map(|m| m.edge_rule).unwrap_or(EdgeRule::SameAp);
    let scaler = scaler.unwrap_or_else(|| Standardizer::identity(params.n_features()));
    Ok(Predictor { model: TrainedModel::Gcn(params), scaler, edge_rule })
}

pub fn save_manifest(dir: &Path, m: &Manifest) -> Result<(), StoreError> {
    let path = dir.join(m.kind.name()).join("manifest.json");
    std::fs::create_dir_all(path.parent().expect("manifest path has a parent"))?;
    write_json(&path, m)
}

pub fn load_manifest(dir: &Path, kind: ModelKind) -> Result<Manifest, StoreError> {
    read_json(&dir.join(kind.name()).join("manifest.json"))
}

/// Saves every fold's model and the manifest.
pub fn save_cross_validation(
    dir: &Path,
    kind: ModelKind,
    train: &TrainConfig,
    dataset: serde_json::Value,
    folds: &[FoldModel],
) -> Result<Manifest, StoreError> {
    for f in folds {
        save_predictor(dir, f.fold, &f.predictor)?;
    }
    let m = Manifest {
        kind,
        edge_rule: train.edge_rule,
        train: train.clone(),
        dataset,
        folds: folds
            .iter()
            .map(|f| FoldSummary {
                fold: f.fold,
                best_epoch: f.best_epoch,
                val_accuracy: f.val_accuracy,
                train_seconds: f.train_seconds,
                history: f.history.clone(),
            })
            .collect(),
    };
    save_manifest(dir, &m)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::gcn::GcnParams;
    use crate::models::mlp::MlpParams;

    #[test]
    fn predictors_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scaler = Standardizer { mean: vec![1.0; 4], std: vec![2.0; 4] };
        for model in [
            TrainedModel::Gcn(GcnParams::init(4, 3, 5, true, 1)),
            TrainedModel::Mlp(MlpParams::init(&[4, 3, 5], 1)),
        ] {
            let p = Predictor { model, scaler: scaler.clone(), edge_rule: EdgeRule::SameAp };
            save_predictor(dir.path(), 2, &p).unwrap();
            assert_eq!(load_predictor(dir.path(), p.model.kind(), 2).unwrap(), p);
        }
        assert!(matches!(load_predictor(dir.path(), ModelKind::Dt, 0), Err(StoreError::Missing(_))));
    }
}
