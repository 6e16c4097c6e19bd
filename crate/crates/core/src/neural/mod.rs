//! Dense, RBF and recurrent networks with hand-written gradients,
//! Adam-family and RMSprop optimizers, and a training loop.

pub mod activation;
pub mod checkpoint;
pub mod loss;
pub mod network;
pub mod optim;
pub mod train;

pub use activation::ActivationKind;
pub use checkpoint::{decode_parameters, encode_parameters, read_parameters, write_parameters};
pub use loss::{loss, LossKind};
pub use network::{
    backward, batch_loss, batch_loss_and_gradient, forward, init_parameters, Architecture, CellKind, Forward,
    NetworkConfig, Preset,
};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use train::{resume, train, StopRule, TrainOptions, TrainState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("binary cross-entropy targets must lie in [0, 1]")]
    TargetRange,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
