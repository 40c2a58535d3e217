//! Attention/CNN encoder, stacked LSTM decoder, Adam and the training loop.

pub mod adam;
pub mod attention;
pub mod encoder;
pub mod lstm;
pub mod model;
pub mod params;
pub mod train;

pub use adam::Adam;
pub use attention::{causal_mask, multi_head_self_attention, scaled_dot_attention, AttentionHead};
pub use encoder::{AcnnEncoder, EncoderKind};
pub use lstm::{LstmCell, LstmStack};
pub use model::{ModelConfig, Seq2SeqModel};
pub use params::{ParamId, ParamStore};
pub use train::{train, TrainConfig};

use crate::autodiff::AutodiffError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in epoch {epoch}, batch {batch}: {source}")]
    NonFinite { epoch: usize, batch: usize, source: AutodiffError },
    #[error("input shape {got:?} does not match model, expected {expected:?}")]
    ShapeMismatch { got: Vec<usize>, expected: Vec<usize> },
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("parameter {name} has shape {got:?}, expected {expected:?}")]
    ParameterShape { name: String, got: Vec<usize>, expected: Vec<usize> },
    #[error("unexpected parameter {0}")]
    UnexpectedParameter(String),
}
