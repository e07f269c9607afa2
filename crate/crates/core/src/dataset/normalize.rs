//! Z-normalization: Z = (X - mu) / sigma with the population standard
//! deviation, and its exact inverse X = Z * sigma + mu.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::DataError;

/// Mean and population standard deviation of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mu: f64,
    pub sigma: f64,
}

pub fn compute_norm_stats(values: &[f64]) -> Result<NormStats, DataError> {
    if values.len() < 2 {
        return Err(DataError::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return Err(DataError::ConstantSeries);
    }
    Ok(NormStats { mu, sigma })
}

pub fn normalize(values: &[f64], stats: &NormStats) -> Vec<f64> {
    values.iter().map(|v| (v - stats.mu) / stats.sigma).collect()
}

/// X_o = X_n * sigma + mu.
pub fn denormalize(values: &[f64], stats: &NormStats) -> Vec<f64> {
    values.iter().map(|v| v * stats.sigma + stats.mu).collect()
}

/// Sidecar format: a `mu,sigma` header plus one row. Values are written with
/// round-trip precision so denormalization stays exact across the file
/// boundary.
pub fn write_stats_csv(path: &Path, stats: &NormStats) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "mu,sigma").map_err(io_err)?;
    writeln!(w, "{},{}", stats.mu, stats.sigma).map_err(io_err)?;
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_stats_csv(path: &Path) -> Result<NormStats, DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bad = |message: String| DataError::BadFormat {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = BufReader::new(File::open(path).map_err(io_err)?).lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty stats file".into()))?
        .map_err(io_err)?;
    if header.trim() != "mu,sigma" {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let row = lines
        .next()
        .ok_or_else(|| bad("missing stats row".into()))?
        .map_err(io_err)?;
    let mut parts = row.trim().split(',');
    let mu = parts
        .next()
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| bad("bad mu".into()))?;
    let sigma = parts
        .next()
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| bad("bad sigma".into()))?;
    if sigma <= 0.0 {
        return Err(DataError::ConstantSeries);
    }
    Ok(NormStats { mu, sigma })
}
