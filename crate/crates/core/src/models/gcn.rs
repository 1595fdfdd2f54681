//! Two-layer graph convolutional classifier.
//!
//! ```text
//! H1 = ReLU(X·W_embed + b_embed)
//! S  = Ã·H1 + H1      (self term; isolated rows reduce to H1)
//! H2 = ReLU(S·W_conv)
//! P  = softmax(H2·W_out + b_out)
//! ```
//!
//! With `self_term` off, connected rows aggregate neighbours only (`S = Ã·H1`).

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::ParamSet;
use super::dense::{gemm, Matrix, ShapeError};
use super::{glorot, CheckpointError, PROB_FLOOR};
use crate::dataset::{Standardizer, TaskGraph};

const MAGIC: &[u8; 8] = b"CPGCNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const FLAG_SELF_TERM: u32 = 1;
const FLAG_SCALER: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub w_embed: Matrix,
    pub b_embed: Matrix,
    pub w_conv: Matrix,
    pub w_out: Matrix,
    pub b_out: Matrix,
    pub self_term: bool,
}

impl ParamSet for GcnParams {
    fn blocks(&self) -> Vec<&[f64]> {
        vec![&self.w_embed.data, &self.b_embed.data, &self.w_conv.data, &self.w_out.data, &self.b_out.data]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.w_embed.data,
            &mut self.b_embed.data,
            &mut self.w_conv.data,
            &mut self.w_out.data,
            &mut self.b_out.data,
        ]
    }
}

impl GcnParams {
    pub fn zeros(n_features: usize, delta: usize, n_classes: usize, self_term: bool) -> GcnParams {
        GcnParams {
            w_embed: Matrix::zeros(n_features, delta),
            b_embed: Matrix::zeros(1, delta),
            w_conv: Matrix::zeros(delta, delta),
            w_out: Matrix::zeros(delta, n_classes),
            b_out: Matrix::zeros(1, n_classes),
            self_term,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(n_features: usize, delta: usize, n_classes: usize, self_term: bool, seed: u64) -> GcnParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = GcnParams::zeros(n_features, delta, n_classes, self_term);
        glorot(&mut p.w_embed, &mut rng);
        glorot(&mut p.w_conv, &mut rng);
        glorot(&mut p.w_out, &mut rng);
        p
    }

    pub fn n_features(&self) -> usize {
        self.w_embed.rows
    }

    pub fn delta(&self) -> usize {
        self.w_embed.cols
    }

    pub fn n_classes(&self) -> usize {
        self.w_out.cols
    }

    /// Random perturbation used by tests and restarts.
    pub fn jitter(&mut self, scale: f64, rng: &mut impl Rng) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|x| *x += scale * rng.gen_range(-1.0..1.0));
        }
    }

    fn check(&self, g: &TaskGraph) -> Result<(), ShapeError> {
        let d = self.delta();
        let ok = g.features.cols == self.n_features()
            && self.b_embed.data.len() == d
            && self.w_conv.rows == d
            && self.w_conv.cols == d
            && self.w_out.rows == d
            && self.b_out.data.len() == self.n_classes()
            && g.norm_adj.n == g.features.rows
            && g.isolated.len() == g.features.rows;
        if ok {
            Ok(())
        } else {
            Err(ShapeError::Mismatch(format!(
                "graph with {} features and {} nodes against a {}-feature, width-{} model",
                g.features.cols,
                g.features.rows,
                self.n_features(),
                d
            )))
        }
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GcnCache {
    z1: Matrix,
    h1: Matrix,
    s: Matrix,
    z2: Matrix,
    h2: Matrix,
    pub probs: Matrix,
}

fn affine(x: &Matrix, w: &Matrix, b: Option<&Matrix>) -> Result<Matrix, ShapeError> {
    let mut z = Matrix::zeros(x.rows, w.cols);
    gemm(x, false, w, false, &mut z)?;
    if let Some(b) = b {
        z.add_row_vector(&b.data);
    }
    Ok(z)
}

pub fn gcn_forward_cached(p: &GcnParams, g: &TaskGraph) -> Result<GcnCache, ShapeError> {
    p.check(g)?;
    let z1 = affine(&g.features, &p.w_embed, Some(&p.b_embed))?;
    let mut h1 = z1.clone();
    h1.relu_inplace();
    let mut s = Matrix::zeros(h1.rows, h1.cols);
    g.norm_adj.mul_add(&h1, &mut s);
    for r in 0..h1.rows {
        if p.self_term || g.isolated[r] {
            s.row_mut(r).iter_mut().zip(h1.row(r)).for_each(|(a, b)| *a += b);
        }
    }
    let z2 = affine(&s, &p.w_conv, None)?;
    let mut h2 = z2.clone();
    h2.relu_inplace();
    let mut probs = affine(&h2, &p.w_out, Some(&p.b_out))?;
    probs.softmax_rows_inplace();
    Ok(GcnCache { z1, h1, s, z2, h2, probs })
}

/// Class probabilities, one row per task.
pub fn gcn_forward(p: &GcnParams, g: &TaskGraph) -> Result<Matrix, ShapeError> {
    Ok(gcn_forward_cached(p, g)?.probs)
}

/// Mean cross-entropy with probabilities floored at [`PROB_FLOOR`].
pub fn gcn_loss(probs: &Matrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let s: f64 = labels.iter().enumerate().map(|(i, &y)| -probs.get(i, y).max(PROB_FLOOR).ln()).sum();
    s / labels.len() as f64
}

/// Softmax cross-entropy gradient at the logits, `(P − Y)/N`.
pub(crate) fn logit_grad(probs: &Matrix, labels: &[usize]) -> Result<Matrix, ShapeError> {
    if labels.len() != probs.rows {
        return Err(ShapeError::Mismatch(format!("{} labels for {} rows", labels.len(), probs.rows)));
    }
    let mut d = probs.clone();
    let n = labels.len().max(1) as f64;
    for (i, &y) in labels.iter().enumerate() {
        if y >= d.cols {
            return Err(ShapeError::Mismatch(format!("label {y} with {} classes", d.cols)));
        }
        d.data[i * d.cols + y] -= 1.0;
    }
    d.scale(1.0 / n);
    Ok(d)
}

/// Loss and its gradient with respect to every parameter.
pub fn gcn_backward(p: &GcnParams, g: &TaskGraph, labels: &[usize]) -> Result<(f64, GcnParams), ShapeError> {
    let c = gcn_forward_cached(p, g)?;
    let loss = gcn_loss(&c.probs, labels);
    let mut grad = GcnParams::zeros(p.n_features(), p.delta(), p.n_classes(), p.self_term);

    let dz3 = logit_grad(&c.probs, labels)?;
    gemm(&c.h2, true, &dz3, false, &mut grad.w_out)?;
    grad.b_out.data = dz3.column_sums();

    let mut dz2 = Matrix::zeros(c.h2.rows, c.h2.cols);
    gemm(&dz3, false, &p.w_out, true, &mut dz2)?;
    dz2.relu_backward_inplace(&c.z2);
    gemm(&c.s, true, &dz2, false, &mut grad.w_conv)?;

    let mut ds = Matrix::zeros(c.s.rows, c.s.cols);
    gemm(&dz2, false, &p.w_conv, true, &mut ds)?;
    let mut dz1 = Matrix::zeros(c.h1.rows, c.h1.cols);
    g.norm_adj.transpose_mul_add(&ds, &mut dz1);
    for r in 0..ds.rows {
        if p.self_term || g.isolated[r] {
            dz1.row_mut(r).iter_mut().zip(ds.row(r)).for_each(|(a, b)| *a += b);
        }
    }
    dz1.relu_backward_inplace(&c.z1);
    gemm(&g.features, true, &dz1, false, &mut grad.w_embed)?;
    grad.b_embed.data = dz1.column_sums();
    Ok((loss, grad))
}

fn put_u32(out: &mut impl Write, v: u32) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn put_f64s(out: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    for x in v {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32(input: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b).map_err(CheckpointError::truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64s(input: &mut impl Read, n: usize) -> Result<Vec<f64>, CheckpointError> {
    let mut buf = vec![0u8; n * 8];
    input.read_exact(&mut buf).map_err(CheckpointError::truncated)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

/// Writes the binary checkpoint: magic, version, F, δ, |D|, flags, then
/// little-endian f64 blocks W_embed, b_embed, W_conv, W_out, b_out and,
/// when present, the feature scaler's mean and std.
pub fn write_checkpoint(out: &mut impl Write, p: &GcnParams, scaler: Option<&Standardizer>) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    put_u32(out, CHECKPOINT_VERSION)?;
    put_u32(out, p.n_features() as u32)?;
    put_u32(out, p.delta() as u32)?;
    put_u32(out, p.n_classes() as u32)?;
    let flags = if p.self_term { FLAG_SELF_TERM } else { 0 } | if scaler.is_some() { FLAG_SCALER } else { 0 };
    put_u32(out, flags)?;
    for b in p.blocks() {
        put_f64s(out, b)?;
    }
    if let Some(s) = scaler {
        put_f64s(out, &s.mean)?;
        put_f64s(out, &s.std)?;
    }
    Ok(())
}

pub fn read_checkpoint(input: &mut impl Read) -> Result<(GcnParams, Option<Standardizer>), CheckpointError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(CheckpointError::truncated)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Format("not a GCN checkpoint".into()));
    }
    let version = get_u32(input)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Format(format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let (f, d, k, flags) =
        (get_u32(input)? as usize, get_u32(input)? as usize, get_u32(input)? as usize, get_u32(input)?);
    if f == 0 || d == 0 || k == 0 || flags & !(FLAG_SELF_TERM | FLAG_SCALER) != 0 {
        return Err(CheckpointError::Format(format!("bad header F={f} δ={d} |D|={k} flags={flags:#x}")));
    }
    let mut p = GcnParams::zeros(f, d, k, flags & FLAG_SELF_TERM != 0);
    for b in p.blocks_mut() {
        let v = get_f64s(input, b.len())?;
        b.copy_from_slice(&v);
    }
    let scaler = if flags & FLAG_SCALER != 0 {
        Some(Standardizer { mean: get_f64s(input, f)?, std: get_f64s(input, f)? })
    } else {
        None
    };
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(CheckpointError::Format("trailing bytes after parameters".into()));
    }
    Ok((p, scaler))
}
