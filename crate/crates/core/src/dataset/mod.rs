//! Dataset ingestion: REDD/REFIT parsing, mains/appliance synchronization,
//! two-column pair files, normalization statistics, site-class labeling, and
//! synthetic desk-scale datasets.

mod normalize;
mod pairs;
mod redd;
mod refit;
mod site;
mod sync;
mod synth;

pub use normalize::{
    compute_norm_stats, denormalize, normalize, read_stats_csv, write_stats_csv, NormStats,
};
pub use pairs::{build_appliance_pair, read_pair_csv, write_pair_csv, PairData};
pub use redd::{parse_redd_house, redd_to_synced, ReddHouse};
pub use refit::{parse_refit_house, RefitHouse};
pub use site::{
    label_site_class, label_site_classes, read_site_csv, site_data_from_columns, write_site_csv,
    SiteClass, SiteData,
};
pub use sync::{read_synced_csv, synchronize_house, write_synced_csv, SyncedHouse};
pub use synth::{synth_generate, synth_site, SiteSynthConfig, SynthAppliance, SynthConfig};

use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("missing labels file {0}")]
    MissingLabels(PathBuf),
    #[error("{path} line {line}: non-monotonic timestamp {got} after {prev}")]
    NonMonotonicTimestamp {
        path: PathBuf,
        line: usize,
        prev: i64,
        got: i64,
    },
    #[error("{path}: missing required column {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("appliance channels disagree on timestamps: {first} and {second} diverge at row {row} ({a} vs {b})")]
    UnalignedAppliances {
        first: String,
        second: String,
        row: usize,
        a: i64,
        b: i64,
    },
    #[error("no appliance channels present")]
    NoAppliances,
    #[error("unknown appliance {0:?}")]
    UnknownAppliance(String),
    #[error("series is constant (sigma = 0); normalization undefined")]
    ConstantSeries,
    #[error("series too short: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("negative watts {0} cannot be class-labeled")]
    NegativeWatts(f64),
    #[error("split ratio {0} outside (0, 1)")]
    BadSplitRatio(f64),
    #[error("period ({0}, {1}) selects no samples")]
    EmptyPeriod(i64, i64),
    #[error("invalid synth config: {0}")]
    InvalidSynthConfig(String),
    #[error("{path}: {message}")]
    BadFormat { path: PathBuf, message: String },
}

/// What a parser saw: totals, skipped line count, and human-readable
/// warnings. Skipped lines never silently disappear.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub lines_total: usize,
    pub lines_skipped: usize,
    pub warnings: Vec<String>,
}

impl ParseReport {
    pub fn merge(&mut self, other: &ParseReport) {
        self.lines_total += other.lines_total;
        self.lines_skipped += other.lines_skipped;
        self.warnings.extend(other.warnings.iter().cloned());
    }
}

/// Timestamped power readings (watts) for one channel. Timestamps are UTC
/// seconds and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self, DataError> {
        if timestamps.len() != values.len() {
            return Err(DataError::BadFormat {
                path: PathBuf::new(),
                message: format!(
                    "timestamp/value length mismatch: {} vs {}",
                    timestamps.len(),
                    values.len()
                ),
            });
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(DataError::NonMonotonicTimestamp {
                    path: PathBuf::new(),
                    line: i + 2,
                    prev: w[0],
                    got: w[1],
                });
            }
        }
        Ok(Self { timestamps, values })
    }

    pub fn empty() -> Self {
        Self {
            timestamps: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}
