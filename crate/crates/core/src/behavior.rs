//! Appliance behavior summaries: max/mean power over a period and the
//! five-state transient histogram of consecutive-reading differences.

use thiserror::Error;

use crate::dataset::TimeSeries;

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("period ({0}, {1}) selects no samples")]
    EmptyPeriod(i64, i64),
    #[error("need at least 2 readings for transient analysis, got {0}")]
    TooShort(usize),
}

/// Max and mean wattage of one appliance over a time period.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSummary {
    pub house: String,
    pub appliance: String,
    /// Half-open UTC second range [start, end).
    pub period: (i64, i64),
    pub max_watts: f64,
    pub mean_watts: f64,
    pub samples: usize,
}

/// Summarizes the samples whose timestamps fall in [start, end).
pub fn power_summary(
    series: &TimeSeries,
    period: (i64, i64),
    house: &str,
    appliance: &str,
) -> Result<PowerSummary, BehaviorError> {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut samples = 0usize;
    for (&ts, &v) in series.timestamps().iter().zip(series.values()) {
        if ts >= period.0 && ts < period.1 {
            max = max.max(v);
            sum += v;
            samples += 1;
        }
    }
    if samples == 0 {
        return Err(BehaviorError::EmptyPeriod(period.0, period.1));
    }
    Ok(PowerSummary {
        house: house.to_string(),
        appliance: appliance.to_string(),
        period,
        max_watts: max,
        mean_watts: sum / samples as f64,
        samples,
    })
}

/// The five transient states, classified from a consecutive difference d:
/// |d| < 3 is stable; 3 <= |d| < 10 minor; 10 <= |d| < 50 large (sign picks
/// increase/decrease). |d| >= 50 falls outside the published bands and is
/// kept in a separate bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransientState {
    Stable,
    MinorIncrease,
    MinorDecrease,
    LargeIncrease,
    LargeDecrease,
    OutOfRange,
}

pub fn classify_transient(diff: f64) -> TransientState {
    let magnitude = diff.abs();
    if magnitude < 3.0 {
        TransientState::Stable
    } else if magnitude < 10.0 {
        if diff > 0.0 {
            TransientState::MinorIncrease
        } else {
            TransientState::MinorDecrease
        }
    } else if magnitude < 50.0 {
        if diff > 0.0 {
            TransientState::LargeIncrease
        } else {
            TransientState::LargeDecrease
        }
    } else {
        TransientState::OutOfRange
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransientHistogram {
    pub stable: u64,
    pub minor_increase: u64,
    pub minor_decrease: u64,
    pub large_increase: u64,
    pub large_decrease: u64,
    pub out_of_range: u64,
}

impl TransientHistogram {
    pub fn total(&self) -> u64 {
        self.stable
            + self.minor_increase
            + self.minor_decrease
            + self.large_increase
            + self.large_decrease
            + self.out_of_range
    }

    /// Label/count pairs in a fixed order for reports and bar charts.
    pub fn counts(&self) -> [(&'static str, u64); 6] {
        [
            ("stable", self.stable),
            ("minor_increase", self.minor_increase),
            ("minor_decrease", self.minor_decrease),
            ("large_increase", self.large_increase),
            ("large_decrease", self.large_decrease),
            ("out_of_range", self.out_of_range),
        ]
    }
}

/// Histograms the pairwise differences of consecutive readings.
pub fn transient_histogram(values: &[f64]) -> Result<TransientHistogram, BehaviorError> {
    if values.len() < 2 {
        return Err(BehaviorError::TooShort(values.len()));
    }
    let mut hist = TransientHistogram::default();
    for pair in values.windows(2) {
        match classify_transient(pair[1] - pair[0]) {
            TransientState::Stable => hist.stable += 1,
            TransientState::MinorIncrease => hist.minor_increase += 1,
            TransientState::MinorDecrease => hist.minor_decrease += 1,
            TransientState::LargeIncrease => hist.large_increase += 1,
            TransientState::LargeDecrease => hist.large_decrease += 1,
            TransientState::OutOfRange => hist.out_of_range += 1,
        }
    }
    Ok(hist)
}
