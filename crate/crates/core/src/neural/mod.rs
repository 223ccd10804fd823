//! Feed-forward networks with exact analytic gradients.
//!
//! Everything is `f64` and batch-major: a [`Matrix`] holds one example per row.

mod actor_critic;
mod adam;
mod mlp;
mod ops;

pub use actor_critic::{ActorCritic, ActorCriticCache, ActorCriticConfig, ActorCriticGrads};
pub use adam::{clip_global_norm, Adam, AdamConfig};
pub use mlp::{Activation, ForwardCache, Layer, LayerGrads, Mlp, MlpGrads};
pub use ops::{
    cross_entropy, entropy, masked_log_softmax, masked_softmax, softmax, softmax_cross_entropy,
    PROB_FLOOR,
};

use alloc::vec::Vec;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("mask has no valid entry")]
    EmptyMask,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("network has no layers")]
    NoLayers,
}

/// Row-major matrix, one example per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: alloc::vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NeuralError> {
        if data.len() != rows * cols {
            return Err(NeuralError::ShapeMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NeuralError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NeuralError::ShapeMismatch { what: "matrix row", expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn row_vector(x: &[f64]) -> Self {
        Matrix { rows: 1, cols: x.len(), data: x.to_vec() }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Rows gathered by index.
    pub fn gather(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }
}

/// Flat parameter access shared by the optimizer and the weight files.
pub trait Parameters {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}
