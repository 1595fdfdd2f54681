//! Fully connected ReLU baseline that sees each task on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::ParamSet;
use super::dense::{gemm, Matrix, ShapeError};
use super::gcn::logit_grad;
use super::glorot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix,
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl ParamSet for MlpParams {
    fn blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [&l.w.data[..], &l.b.data[..]]).collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w.data[..], &mut l.b.data[..]]).collect()
    }
}

impl MlpParams {
    /// Zero network with layer widths `dims` (input first, classes last).
    pub fn zeros(dims: &[usize]) -> MlpParams {
        let layers =
            dims.windows(2).map(|w| Layer { w: Matrix::zeros(w[0], w[1]), b: Matrix::zeros(1, w[1]) }).collect();
        MlpParams { layers }
    }

    pub fn init(dims: &[usize], seed: u64) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = MlpParams::zeros(dims);
        for l in &mut p.layers {
            glorot(&mut l.w, &mut rng);
        }
        p
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.layers.iter().map(|l| l.w.rows).collect();
        d.extend(self.layers.last().map(|l| l.w.cols));
        d
    }
}

/// Pre-activations of every layer; the last entry holds probabilities.
fn forward_all(p: &MlpParams, x: &Matrix) -> Result<(Vec<Matrix>, Vec<Matrix>), ShapeError> {
    let mut pre = Vec::with_capacity(p.layers.len());
    let mut act = vec![x.clone()];
    for (i, l) in p.layers.iter().enumerate() {
        let input = act.last().expect("input present");
        let mut z = Matrix::zeros(input.rows, l.w.cols);
        gemm(input, false, &l.w, false, &mut z)?;
        z.add_row_vector(&l.b.data);
        let mut a = z.clone();
        if i + 1 == p.layers.len() {
            a.softmax_rows_inplace();
        } else {
            a.relu_inplace();
        }
        pre.push(z);
        act.push(a);
    }
    Ok((pre, act))
}

pub fn mlp_forward(p: &MlpParams, x: &Matrix) -> Result<Matrix, ShapeError> {
    let (_, mut act) = forward_all(p, x)?;
    Ok(act.pop().expect("output present"))
}

pub fn mlp_backward(p: &MlpParams, x: &Matrix, labels: &[usize]) -> Result<(f64, MlpParams), ShapeError> {
    let (pre, act) = forward_all(p, x)?;
    let probs = act.last().expect("output present");
    let loss = super::gcn::gcn_loss(probs, labels);
    let mut grad = MlpParams::zeros(&p.dims());
    let mut delta = logit_grad(probs, labels)?;
    for i in (0..p.layers.len()).rev() {
        gemm(&act[i], true, &delta, false, &mut grad.layers[i].w)?;
        grad.layers[i].b.data = delta.column_sums();
        if i > 0 {
            let mut d = Matrix::zeros(delta.rows, p.layers[i].w.rows);
            gemm(&delta, false, &p.layers[i].w, true, &mut d)?;
            d.relu_backward_inplace(&pre[i - 1]);
            delta = d;
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let p = MlpParams::zeros(&[3, 4, 4, 5]);
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 4.0]]).unwrap();
        let probs = mlp_forward(&p, &x).unwrap();
        assert!(probs.data.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn rows_are_independent() {
        let p = MlpParams::init(&[3, 6, 6, 4], 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_vec(6, 3, (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let full = mlp_forward(&p, &x).unwrap();
        let perm = [5, 2, 0, 1, 4, 3];
        let shuffled = mlp_forward(&p, &x.select_rows(&perm)).unwrap();
        for (i, &r) in perm.iter().enumerate() {
            assert_eq!(shuffled.row(i), full.row(r));
        }
    }

    #[test]
    fn dims_round_trip() {
        assert_eq!(MlpParams::zeros(&[27, 32, 32, 13]).dims(), vec![27, 32, 32, 13]);
    }
}
