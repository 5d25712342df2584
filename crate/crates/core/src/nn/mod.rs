//! Dense feedforward classifier written from scratch.
//!
//! Hidden layers use ReLU, the output layer softmax. Training minimizes the
//! per-unit binary cross-entropy of the softmax outputs plus an optional L2
//! penalty on edge weights (biases are not penalized), using mini-batch Adam.
//! All training math is `f64`; the deployable model file stores `f32`.

mod activation;
mod adam;
mod metrics;
mod model_file;
mod network;
mod train;

pub use activation::{relu, softmax};
pub use adam::{adam_step, AdamState};
pub use metrics::{evaluate, ConfusionMatrix, Evaluation};
pub use model_file::{
    export_model, import_model, ModelFileError, TrainedModel, MODEL_MAGIC, MODEL_VERSION,
};
pub use network::{one_hot, DenseLayer, Gradients, ModelParams, Prediction, LOG_CLAMP};
pub use train::{train, train_and_evaluate, TrainReport};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("empty input vector")]
    EmptyVector,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("{inputs} inputs but {targets} targets")]
    BatchLengthMismatch { inputs: usize, targets: usize },
    #[error("target row {0} is not one-hot")]
    NotOneHot(usize),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("parameter shapes do not match")]
    ShapeMismatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model has {model} output classes, dataset vocabulary has {data}")]
    ClassCountMismatch { model: usize, data: usize },
}

/// Layer widths from input to output. Hidden layers are ReLU, the output layer
/// is softmax; neither is configurable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    layer_sizes: Vec<usize>,
}

impl ModelSpec {
    /// Default activity network: 13 inputs, hidden widths 15/20/25/30/60,
    /// five output classes.
    pub const DEFAULT_SIZES: [usize; 7] = [13, 15, 20, 25, 30, 60, 5];

    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, NnError> {
        if layer_sizes.len() < 3 {
            return Err(NnError::InvalidSpec(format!(
                "need input, at least one hidden and an output layer; got {} sizes",
                layer_sizes.len()
            )));
        }
        if let Some(i) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(NnError::InvalidSpec(format!("layer {i} has zero units")));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    /// Number of weight layers (one fewer than the number of sizes).
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            layer_sizes: Self::DEFAULT_SIZES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// L2 regularization strength on edge weights.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 128,
            epochs: 10,
            lambda: 0.0,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |msg: &str| Err(NnError::InvalidHyperparams(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        Ok(())
    }
}
