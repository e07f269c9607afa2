//! 2D appliance signatures: Mexican-hat CWT scalograms, STFT spectrograms,
//! pixel-wise fused images, sliding-window dataset generation, label-safe
//! augmentation, and balanced ancestor-disjoint train/test splits.

mod augment;
mod cwt;
mod image;
mod sliding;
mod split;
mod stft;

pub use augment::{augment_image, random_augment, AugmentOp};
pub use cwt::{mexican_hat_cwt, ricker, CwtConfig};
pub use image::{
    fuse_images, load_png, render_image, save_png, Provenance, SpectrogramImage, TransformKind,
};
pub use sliding::{sliding_spectrogram_dataset, SlidingConfig, SlidingContext};
pub use split::{split_train_test, Split, SplitEntry, SplitResult};
pub use stft::{stft_spectrogram, StftConfig, WindowFn};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("window is empty")]
    EmptyWindow,
    #[error("data length {len} is shorter than required {needed}")]
    DataTooShort { len: usize, needed: usize },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("matrix contains a non-finite value")]
    NonFiniteMatrix,
    #[error("image dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
    #[error("degenerate crop box {x0},{y0} {w}x{h} in {img_w}x{img_h} image")]
    DegenerateCrop {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        img_w: usize,
        img_h: usize,
    },
    #[error("class {0:?} has no original images")]
    ClassWithoutOriginals(String),
    #[error("class {0:?} needs at least 2 original ancestors for a disjoint split, found {1}")]
    InsufficientOriginals(String, usize),
    #[error("class {0:?} exhausted its augmentation budget of {1}")]
    AugmentBudgetExhausted(String, usize),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Dense row-major matrix of transform coefficients (rows x cols).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
