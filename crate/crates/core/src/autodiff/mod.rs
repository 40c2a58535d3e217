//! Define-by-run reverse-mode automatic differentiation over dense `f64`
//! tensors.
//!
//! Every forward op appends a node to a [`Tape`] holding its value and the
//! ids of its inputs. [`Tape::backward`] walks the nodes in reverse and
//! accumulates gradients for every node that depends on a parameter leaf.
//! A non-finite value produced by any op aborts with the op's name.

pub mod gradcheck;
mod kernels;
mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: got {got:?}, expected {expected:?}")]
    ShapeMismatch { op: &'static str, got: Vec<usize>, expected: Vec<usize> },
    #[error("non-finite value produced by {0}")]
    NonFiniteValue(&'static str),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tape already consumed by a backward pass")]
    TapeAlreadyConsumed,
    #[error("invalid argument to {op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
}

#[cfg(test)]
mod tests;
