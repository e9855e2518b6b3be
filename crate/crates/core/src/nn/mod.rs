//! Dense feed-forward networks with analytic gradients and Adam.

mod checkpoint;
mod mlp;
mod optim;

pub use checkpoint::{Checkpoint, MlpRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use mlp::{soft_clamp_log_var, Activation, Cache, Dense, Gradients, Head, Mlp, LOG_VAR_MAX, LOG_VAR_MIN};
pub use optim::{gaussian_nll, gaussian_nll_batch, mse_loss, AdamConfig, AdamState};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cache was recorded before the parameters last changed")]
    StaleCache,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
