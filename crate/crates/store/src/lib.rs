//! Computation-enabled in-memory tensor store.
//!
//! The hub of the workflow architecture: keyed tensors, datasets,
//! aggregation lists, and stored models with atomic single-key operations,
//! exposed over a compact binary TCP protocol. Separately launched
//! simulation and ML processes exchange all state through this store and
//! synchronize by polling flags; nothing else connects them.
//!
//! - [`Store`] is the in-process data model,
//! - [`server`] serves it over TCP,
//! - [`StoreClient`] is the client side, including the naming-convention
//!   machinery and polling primitives the workflows build on.

mod client;
mod fields;
mod naming;
mod poll;
pub mod protocol;
pub mod server;
mod state;
mod tensor;
mod topology;

pub use client::{ClientError, StoreClient, STORE_ADDR_ENV};
pub use fields::{pack_fields, FieldBlock, INTERNAL_PATCH};
pub use naming::{render, NamingConvention, META_KEY_DATASET, META_KEY_FIELD};
pub use poll::{PollSpec, Polled};
pub use state::Store;
pub use tensor::{Dataset, Dtype, Kind, Tensor};
pub use topology::topology_connections;

/// Store-level failures. `NotFound` is a signal for pollers, not a fault.
#[derive(Debug, Clone, PartialEq)]
pub enum StoreError {
    /// Structural validation failed (length/dims inconsistency and kin).
    Malformed(String),
    /// A tensor with a zero dimension was rejected.
    ZeroSized,
    /// Key absent in the addressed namespace.
    NotFound,
    /// List append referenced a dataset key that does not exist.
    Dangling(String),
    /// Inference shapes do not line up.
    ShapeMismatch(String),
    /// Model bytes failed to decode.
    MalformedModel(String),
    /// Empty or otherwise unusable name.
    InvalidName(String),
    /// Template referenced a variable with no binding.
    UnboundPlaceholder(String),
    /// Requested variant is deliberately not implemented.
    Unsupported(String),
}

impl std::fmt::Display for StoreError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StoreError::Malformed(msg) => write!(f, "malformed: {msg}"),
            StoreError::ZeroSized => write!(f, "zero-sized tensor"),
            StoreError::NotFound => write!(f, "not found"),
            StoreError::Dangling(key) => write!(f, "dangling dataset key: {key}"),
            StoreError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            StoreError::MalformedModel(msg) => write!(f, "malformed model: {msg}"),
            StoreError::InvalidName(msg) => write!(f, "invalid name: {msg}"),
            StoreError::UnboundPlaceholder(name) => {
                write!(f, "unbound placeholder: {name}")
            }
            StoreError::Unsupported(msg) => write!(f, "unsupported: {msg}"),
        }
    }
}

impl std::error::Error for StoreError {}
