//! Desk-scale pretraining: a patch encoder, a scattering-query decoder with
//! masked attention, coefficient heads, the label and power losses, plain
//! gradient descent, and segmentation metrics.

mod loss;
mod metrics;
mod model;
mod train;

use thiserror::Error;

use crate::autodiff::AutodiffError;

pub use loss::{loss_power, loss_yamaguchi, total_loss, total_loss_value};
pub use metrics::{eval_metrics, ComponentMetrics, EvalMetrics};
pub use model::{
    encode, masked_attention_layer, patchify, predict_heads, raster_channels, self_attention_layer, update_mask,
    AttentionMask, DecoderConfig, DecoderWeights, EncoderConfig, Forward, HeadOutputs, ModelParams, BLOCKED,
    DECOMPOSITION_QUERIES, MASK_THRESHOLD, YAMAGUCHI_QUERIES,
};
pub use train::{evaluate, predict, train, LossRecord, TrainConfig, TrainOutcome, TrainingScene, DIVERGENCE_LIMIT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PretrainError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("training diverged at iteration {iter}: total loss {loss}")]
    Diverged { iter: usize, loss: f64 },
}
