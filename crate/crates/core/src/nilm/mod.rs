//! The seq2-[3]point disaggregator: network assembly, per-appliance
//! training, transfer training with frozen convolutions, series stitching,
//! threshold evaluation, and four-class site evaluation.

mod eval;
mod stitch;
mod train;

pub use eval::{
    predict_windows, site_evaluate, tau_for_appliance, threshold_accuracy, EvalReport,
    SiteEvalReport,
};
pub use stitch::{predict_series, StitchedSeries};
pub use train::{train_appliance, transfer_train, TrainConfig, TrainReport};

use thiserror::Error;

use crate::nn::{
    conv_output_size, Activation, Conv1dSpec, DenseSpec, LayerOp, Network, NetworkBuilder, NnError,
};
use crate::windowing::WindowError;

#[derive(Debug, Error)]
pub enum NilmError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("prediction/ground-truth length mismatch: {pd} vs {gt}")]
    LengthMismatch { pd: usize, gt: usize },
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("checkpoint does not match the seq2-[3]point structure: {0}")]
    StructuralMismatch(String),
    #[error("window count mismatch: {windows} windows but {labels} labels")]
    LabelMismatch { windows: usize, labels: usize },
    #[error("no windows to evaluate")]
    Empty,
}

/// Conv attributes of the five layers: (in_c, out_c, k_s), all with
/// stride 1 and padding 0.
const CONV_TABLE: [(usize, usize, usize); 5] =
    [(1, 30, 10), (30, 30, 8), (30, 40, 6), (40, 50, 5), (50, 50, 5)];

/// The seq2-[3]point architecture: five ReLU conv layers, flatten, a ReLU
/// dense layer of 1300 units, and a linear 3-unit output. Trained with MSE
/// and Adam at learning rate 0.001.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seq23PointSpec {
    pub window_len: usize,
}

impl Seq23PointSpec {
    pub const HIDDEN: usize = 1300;
    pub const OUTPUTS: usize = 3;
    pub const LEARNING_RATE: f64 = 0.001;

    /// The published full-scale model (window length 1000, flatten 48,550).
    pub fn paper() -> Self {
        Self { window_len: 1000 }
    }

    /// Scaled variant with a different window length; the conv stack and
    /// dense head widths are unchanged.
    pub fn with_window(window_len: usize) -> Self {
        Self { window_len }
    }

    pub fn conv_specs() -> [Conv1dSpec; 5] {
        CONV_TABLE.map(|(in_c, out_c, k)| {
            Conv1dSpec::new(in_c, out_c, k, 1, 0).expect("table entries are valid")
        })
    }

    /// Output width after each conv layer.
    pub fn conv_widths(&self) -> Result<[usize; 5], NilmError> {
        let mut widths = [0usize; 5];
        let mut w = self.window_len;
        for (i, spec) in Self::conv_specs().iter().enumerate() {
            w = conv_output_size(w, spec)?;
            widths[i] = w;
        }
        Ok(widths)
    }

    /// Flattened feature count entering the dense head (48,550 at L=1000).
    pub fn flatten_width(&self) -> Result<usize, NilmError> {
        let widths = self.conv_widths()?;
        Ok(CONV_TABLE[4].1 * widths[4])
    }

    /// Parameter count of the dense head (weights + biases of both layers).
    pub fn head_param_count(&self) -> Result<u64, NilmError> {
        let f = self.flatten_width()? as u64;
        let h = Self::HIDDEN as u64;
        let o = Self::OUTPUTS as u64;
        Ok(f * h + h + h * o + o)
    }

    /// Builds the network with seeded initialization.
    pub fn build(&self, seed: u64) -> Result<Network, NilmError> {
        let flatten = self.flatten_width()?;
        let mut builder = NetworkBuilder::new(seed);
        for spec in Self::conv_specs() {
            builder = builder.conv1d(spec, true);
        }
        let net = builder
            .flatten()
            .dense(DenseSpec::new(flatten, Self::HIDDEN, Activation::Relu)?)
            .dense(DenseSpec::new(Self::HIDDEN, Self::OUTPUTS, Activation::None)?)
            .build();
        Ok(net)
    }

    /// Recovers the spec from a built network by inverting the conv chain
    /// (each kernel shrinks the width by k-1; 29 in total) from the first
    /// dense layer's input width, then validating the full structure.
    pub fn infer(network: &Network) -> Result<Self, NilmError> {
        let flatten = match network.layers().get(6).map(|l| &l.op) {
            Some(LayerOp::Dense { spec, .. }) => spec.in_features,
            _ => {
                return Err(NilmError::StructuralMismatch(
                    "layer 6 is not a dense layer".into(),
                ))
            }
        };
        let final_channels = CONV_TABLE[4].1;
        if flatten % final_channels != 0 {
            return Err(NilmError::StructuralMismatch(format!(
                "flatten width {flatten} is not a multiple of {final_channels}"
            )));
        }
        let shrinkage: usize = CONV_TABLE.iter().map(|(_, _, k)| k - 1).sum();
        let spec = Self::with_window(flatten / final_channels + shrinkage);
        spec.matches(network)?;
        Ok(spec)
    }

    /// Validates that `network` has exactly this structure (used before
    /// transfer training on a loaded checkpoint).
    pub fn matches(&self, network: &Network) -> Result<(), NilmError> {
        let layers = network.layers();
        if layers.len() != 8 {
            return Err(NilmError::StructuralMismatch(format!(
                "expected 8 layers, found {}",
                layers.len()
            )));
        }
        for (i, expected) in Self::conv_specs().iter().enumerate() {
            match &layers[i].op {
                LayerOp::Conv1d { spec, relu: true, .. } if spec == expected => {}
                _ => {
                    return Err(NilmError::StructuralMismatch(format!(
                        "layer {} is not conv1d {:?}",
                        i, expected
                    )))
                }
            }
        }
        if !matches!(layers[5].op, LayerOp::Flatten) {
            return Err(NilmError::StructuralMismatch("layer 5 is not flatten".into()));
        }
        let flatten = self.flatten_width()?;
        match &layers[6].op {
            LayerOp::Dense { spec, .. }
                if spec.in_features == flatten
                    && spec.out_features == Self::HIDDEN
                    && spec.activation == Activation::Relu => {}
            _ => {
                return Err(NilmError::StructuralMismatch(format!(
                    "layer 6 is not dense {}x{}",
                    flatten,
                    Self::HIDDEN
                )))
            }
        }
        match &layers[7].op {
            LayerOp::Dense { spec, .. }
                if spec.in_features == Self::HIDDEN
                    && spec.out_features == Self::OUTPUTS
                    && spec.activation == Activation::None => {}
            _ => {
                return Err(NilmError::StructuralMismatch(format!(
                    "layer 7 is not dense {}x{}",
                    Self::HIDDEN,
                    Self::OUTPUTS
                )))
            }
        }
        Ok(())
    }
}
