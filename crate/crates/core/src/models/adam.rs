use serde::{Deserialize, Serialize};

use super::dense::ShapeError;

/// A model's trainable parameters, exposed as flat blocks in a fixed order.
pub trait ParamSet {
    fn blocks(&self) -> Vec<&[f64]>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &impl ParamSet, cfg: AdamConfig) -> AdamState {
        let m: Vec<Vec<f64>> = params.blocks().iter().map(|b| vec![0.0; b.len()]).collect();
        AdamState { cfg, step: 0, v: m.clone(), m }
    }

    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<(), ShapeError> {
        let gs = grads.blocks();
        let mut ps = params.blocks_mut();
        if ps.len() != self.m.len() || gs.len() != ps.len() {
            return Err(ShapeError::Mismatch(format!("{} parameter blocks, {} gradient blocks", ps.len(), gs.len())));
        }
        for (i, (p, g)) in ps.iter().zip(&gs).enumerate() {
            if p.len() != self.m[i].len() || g.len() != p.len() {
                return Err(ShapeError::Mismatch(format!("block {i}: {} parameters, {} gradients", p.len(), g.len())));
            }
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (i, (p, g)) in ps.iter_mut().zip(&gs).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                p[j] -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f64>);

    impl ParamSet for Scalar {
        fn blocks(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = Scalar(vec![1.0]);
        let mut s = AdamState::new(&w, AdamConfig::default());
        s.step(&mut w, &Scalar(vec![1.0]), 0.01).unwrap();
        assert!((w.0[0] - (1.0 - 0.01 / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut w = Scalar(vec![0.3, -2.0]);
        let mut s = AdamState::new(&w, AdamConfig::default());
        s.step(&mut w, &Scalar(vec![0.0, 0.0]), 0.01).unwrap();
        assert_eq!(w.0, vec![0.3, -2.0]);
    }

    #[test]
    fn momentum_decays_without_sign_flip() {
        let mut w = Scalar(vec![0.0]);
        let mut s = AdamState::new(&w, AdamConfig::default());
        s.step(&mut w, &Scalar(vec![1.0]), 0.01).unwrap();
        let mut prev = w.0[0];
        let mut last_delta = f64::INFINITY;
        for _ in 0..2 {
            s.step(&mut w, &Scalar(vec![0.0]), 0.01).unwrap();
            let delta = prev - w.0[0];
            assert!(delta > 0.0 && delta < last_delta);
            last_delta = delta;
            prev = w.0[0];
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut w = Scalar(vec![0.0]);
        let mut s = AdamState::new(&w, AdamConfig::default());
        assert!(s.step(&mut w, &Scalar(vec![0.0, 1.0]), 0.01).is_err());
    }
}
