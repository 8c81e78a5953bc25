//! Epsilon-prediction network, training loop, analytic oracle and checkpoints.

mod checkpoint;
pub(crate) mod layers;
mod model;
mod oracle;
mod scalar;
mod train;
mod unet;

pub use checkpoint::{read_checkpoint, write_checkpoint, RawCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::Segment;
pub use model::{init_model, Denoiser, DenoiserModel, EpsExample};
pub use oracle::{oracle_eps_gaussian, GaussianOracle};
pub use scalar::{gemm, Scalar};
pub use train::{batch_grad, clip_grad_norm, epoch_order, train, Adam, TrainConfig};
pub use unet::{analytic_param_count, Arch, UNet};
