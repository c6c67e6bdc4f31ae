//! Small differentiable-network toolkit: dense and LSTM layers with exact
//! reverse-mode gradients, an input-gradient penalty with its parameter
//! gradient, Adam, and patience-based early stopping.

mod activation;
pub mod io;
mod loss;
mod network;
mod optim;
pub mod train;

use thiserror::Error;

pub use activation::{sigmoid, Activation};
pub use loss::{loss_and_grad, LossKind, SMOOTH_MAE_DELTA};
pub use network::{as_steps, init_network, ForwardCache, LayerKind, LayerSpec, Network, NetworkParams, NetworkSpec};
pub use optim::{adam_step, early_stop_update, AdamState, EarlyStopState};
pub use train::{fit, Dataset, FitOutcome, TrainConfig};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged (non-finite loss)")]
    Diverged,
    #[error("bad model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
