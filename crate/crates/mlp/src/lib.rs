//! Minimal dense feed-forward networks.
//!
//! The store executes these models for inference, and the mesh-motion
//! trainer fits them online with full-batch Adam. The serialization format
//! in [`codec`] doubles as the model wire body, so a model trained here runs
//! bit-identically inside the store.

mod codec;
mod model;
mod train;

pub use codec::{deserialize, serialize};
pub use model::{Activation, Layer, MlpModel};
pub use train::{gradients, mse, train_step, LayerGrads, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq)]
pub enum MlpError {
    /// Input width or layer chaining does not line up.
    ShapeMismatch(String),
    /// Construction rejected the layer stack.
    InvalidModel(String),
    /// Byte buffer does not decode to a model.
    MalformedModel(String),
    /// Training loss left the finite range.
    NonFiniteLoss { epoch: usize },
}

impl std::fmt::Display for MlpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MlpError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            MlpError::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            MlpError::MalformedModel(msg) => write!(f, "malformed model: {msg}"),
            MlpError::NonFiniteLoss { epoch } => {
                write!(f, "non-finite loss at epoch {epoch}")
            }
        }
    }
}

impl std::error::Error for MlpError {}
