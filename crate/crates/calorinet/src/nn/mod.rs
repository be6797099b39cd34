//! Minimal deterministic neural-network kernels with exact backpropagation.

mod checkpoint;
mod gradcheck;
mod layers;
mod model;
mod optim;
mod tensor;
mod train;

pub use checkpoint::{Checkpoint, PipelineConfig, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, LayerCheck};
pub use layers::{Layer, Padding};
pub use model::{stack_to_tensor, window_to_tensor, Model};
pub use optim::{Adam, AdamConfig};
pub use tensor::Tensor;
pub use train::{evaluate_loss, train, EpochLoss, TrainConfig, TrainReport, TrainSample};
