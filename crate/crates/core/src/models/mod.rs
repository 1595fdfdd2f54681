//! Dense kernels and the three placement classifiers.

pub mod adam;
pub mod dense;
pub mod gcn;
pub mod mlp;
pub mod store;
pub mod train;
pub mod tree;

use rand::Rng;
use thiserror::Error;

use dense::Matrix;

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

impl CheckpointError {
    fn truncated(e: std::io::Error) -> CheckpointError {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CheckpointError::Format("truncated checkpoint".into())
        } else {
            CheckpointError::Io(e)
        }
    }
}

/// Fills `w` uniformly in ±√(6/(fan_in+fan_out)).
pub fn glorot(w: &mut Matrix, rng: &mut impl Rng) {
    let a = (6.0 / (w.rows + w.cols) as f64).sqrt();
    w.data.iter_mut().for_each(|x| *x = rng.gen_range(-a..a));
}
