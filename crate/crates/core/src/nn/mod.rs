//! From-scratch neural-network engine: dense and convolutional layers with
//! manual backpropagation, SGD/Adam optimizers, parameter freezing, and a
//! finite-difference gradient verifier.
//!
//! Training is single-threaded and deterministic under a fixed seed.
//! Inference on a finalized [`Network`] is read-only and may run from many
//! threads at once.

mod gradcheck;
mod layer;
mod loss;
mod network;
mod optimizer;

pub use gradcheck::finite_difference_check;
pub use layer::{
    conv_output_size, Activation, Conv1dSpec, Conv2dSpec, DenseSpec, Layer, LayerCache,
    LayerGrads, LayerOp,
};
pub use loss::{loss_eval, LossKind};
pub use network::{MomentSlots, Network, NetworkBuilder};
pub use optimizer::OptimizerKind;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{layer}: {dimension} is {got}, expected {expected}")]
    ShapeMismatch {
        layer: String,
        dimension: String,
        expected: usize,
        got: usize,
    },
    #[error("{layer}: input width {width} plus 2*padding {padding} is smaller than kernel {kernel}")]
    WindowSmallerThanKernel {
        layer: String,
        width: usize,
        padding: usize,
        kernel: usize,
    },
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("cross-entropy input row {row} sums to {sum}, not 1 within 1e-9")]
    NotAProbability { row: usize, sum: f64 },
    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),
    #[error("gradient list has {got} entries for {expected} layers")]
    GradientCountMismatch { expected: usize, got: usize },
    #[error("layer selector {0:?} matched no parameterized layer")]
    SelectorMatchedNothing(String),
    #[error("finite-difference epsilon {0} outside [1e-6, 1e-3]")]
    BadEpsilon(f64),
    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch} (parameter norm {param_norm})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        param_norm: f64,
    },
}
