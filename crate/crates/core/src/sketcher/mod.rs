//! Decoder-only recurrent sketch model with a mixture density output.
//!
//! A single-layer LSTM reads stroke-5 rows and predicts, at every step, a
//! mixture of bivariate Gaussians over the next offset plus a categorical
//! distribution over the next pen state. Gradients are computed by hand
//! (backpropagation through time) and checked against finite differences.

mod checkpoint;
mod gradcheck;
mod lstm;
mod mdn;
mod params;
mod real;
mod sample;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{Checkpoint, LoadedModel, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, grad_check_with, relative_error, GRAD_CHECK_FLOOR, GRAD_CHECK_H};
pub use lstm::{forward_step, init_state, sequence_gradient, sequence_loss, RecurrentState};
pub use mdn::{mdn_nll, MixtureParams, NllTerms};
pub use params::ModelParams;
pub use real::Real;
pub use sample::{complete, sample_next, Suggestion, DEFAULT_STROKE_ROWS};
pub use train::{
    batch_gradient, evaluate, fine_tune, train, write_loss_csv, EpochHook, EpochRecord, TrainReport,
};

#[derive(Debug, Error)]
pub enum SketcherError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid mixture: {0}")]
    InvalidDistribution(String),
    #[error("loss became {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SketcherConfig {
    pub hidden_size: usize,
    pub num_mixtures: usize,
    pub learning_rate: f64,
    pub grad_clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Learning-rate multiplier used by [`fine_tune`].
    pub fine_tune_factor: f64,
}

impl Default for SketcherConfig {
    fn default() -> Self {
        Self {
            hidden_size: 256,
            num_mixtures: 20,
            learning_rate: 1e-3,
            grad_clip: 1.0,
            epochs: 10,
            batch_size: 100,
            seed: 0,
            fine_tune_factor: 0.1,
        }
    }
}

impl SketcherConfig {
    pub fn validate(&self) -> Result<(), SketcherError> {
        if self.hidden_size == 0 || self.num_mixtures == 0 || self.batch_size == 0 {
            return Err(SketcherError::InvalidInput(
                "hidden_size, num_mixtures and batch_size must be at least 1".into(),
            ));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate)
            || !positive(self.grad_clip)
            || !positive(self.fine_tune_factor)
        {
            return Err(SketcherError::InvalidInput(
                "learning_rate, grad_clip and fine_tune_factor must be positive".into(),
            ));
        }
        Ok(())
    }
}
