//! Distance-biased attention.
//!
//! A learned bias `H[i, j, h]` is added to the scaled dot-product logits of
//! head `h` before the softmax:
//!
//! ```text
//! H[i, j, :] = MLP([e⁰[D(i,j,0)], …, eᴷ[D(i,j,K)]])
//! out_h      = softmax(Q_h K_hᵀ / √d′ + H[:, :, h]) V_h
//! ```
//!
//! Keys and values may come from the same nodes as the queries (dense
//! attention over `G⁰`) or from the clusters of a coarser level (linear
//! attention over `Gᵏ`, with a high-level distance tensor). Both share one
//! implementation; the forward pass caches what the backward pass needs and
//! the backward pass returns exact gradients for every parameter.

mod bias;
pub mod gradcheck;
mod layer;
pub mod train;

use ndarray::{ArrayViewD, ArrayViewMutD};
use thiserror::Error;

pub use bias::{bias_matrix, BiasMatrix, BiasParams};
pub use layer::{
    attention_forward, hdse_attention_forward, linear_attention_forward, AttentionCache, AttentionGrads,
    AttentionParams, Gradients, HdseLayer, LayerParams,
};

#[derive(Debug, Error, PartialEq)]
pub enum AttentionError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("distance code {code} outside 0..={max} at ({i}, {j}, level {k})")]
    CodeOutOfRange { code: u8, max: u8, i: usize, j: usize, k: usize },
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("invalid hyperparameter: {0}")]
    Config(String),
}

/// Uniform access to a parameter set as a flat list of tensors, in a fixed
/// order. Gradients use the same types, so `tensors()` of a gradient lines
/// up with `tensors_mut()` of the parameters.
pub trait ParamSet {
    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>>;
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>>;
    fn tensor_names(&self) -> Vec<String>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (mut p, g) in self.tensors_mut().into_iter().zip(other.tensors()) {
            p += &g;
        }
    }

    /// `self -= step * grad`.
    fn descend(&mut self, grad: &Self, step: f64)
    where
        Self: Sized,
    {
        for (mut p, g) in self.tensors_mut().into_iter().zip(grad.tensors()) {
            p.scaled_add(-step, &g);
        }
    }
}

pub(crate) fn check_finite<'a, I: IntoIterator<Item = &'a f64>>(values: I, what: &'static str) -> Result<(), AttentionError> {
    if values.into_iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(AttentionError::NonFinite(what))
    }
}
