//! Sliding aggregate windows paired with 3-point appliance targets
//! (first, mid, last), plus an on-disk window cache keyed by config hash.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("data length {len} is shorter than window length {window_len}")]
    DataTooShort { len: usize, window_len: usize },
    #[error("aggregate and appliance columns differ in length: {aggregate} vs {appliance}")]
    ColumnMismatch { aggregate: usize, appliance: usize },
    #[error("invalid window config: {0}")]
    BadConfig(String),
    #[error("window of length {got} does not match configured length {expected}")]
    WrongWindowLength { expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt window cache: {0}")]
    Corrupt(String),
}

/// Sliding scheme: start index S, window length L (end = S + L), sample
/// budget B, and stride (offset).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub start: usize,
    pub window_len: usize,
    pub budget: usize,
    pub offset: usize,
}

impl WindowConfig {
    /// The paper's defaults: S=0, E=L=1000, B=20000, offset=35.
    pub fn paper() -> Self {
        Self {
            start: 0,
            window_len: 1000,
            budget: 20_000,
            offset: 35,
        }
    }

    pub fn end(&self) -> usize {
        self.start + self.window_len
    }

    fn validate(&self) -> Result<(), WindowError> {
        if self.window_len == 0 {
            return Err(WindowError::BadConfig("window length must be >= 1".into()));
        }
        if self.offset == 0 {
            return Err(WindowError::BadConfig("offset must be >= 1".into()));
        }
        if self.budget == 0 {
            return Err(WindowError::BadConfig("budget must be >= 1".into()));
        }
        Ok(())
    }

    fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for v in [self.start, self.window_len, self.budget, self.offset] {
            h.update((v as u64).to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Row-aligned window inputs (B x L) and 3-point targets (B x 3), with each
/// row's source start index retained.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    window_len: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    starts: Vec<usize>,
}

impl WindowBatch {
    pub fn rows(&self) -> usize {
        self.starts.len()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.window_len..(i + 1) * self.window_len]
    }

    pub fn target_row(&self, i: usize) -> &[f64] {
        &self.targets[i * 3..(i + 1) * 3]
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Inputs for rows `range` as a `[len, 1, L]` tensor.
    pub fn input_tensor(&self, range: std::ops::Range<usize>) -> Tensor {
        let data = self.inputs[range.start * self.window_len..range.end * self.window_len].to_vec();
        Tensor::from_parts(vec![range.len(), 1, self.window_len], data)
    }

    /// Targets for rows `range` as a `[len, 3]` tensor.
    pub fn target_tensor(&self, range: std::ops::Range<usize>) -> Tensor {
        let data = self.targets[range.start * 3..range.end * 3].to_vec();
        Tensor::from_parts(vec![range.len(), 3], data)
    }

    /// Gathers the given rows into `[n, 1, L]` input and `[n, 3]` target
    /// tensors (used for mini-batch assembly).
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let mut inputs = Vec::with_capacity(indices.len() * self.window_len);
        let mut targets = Vec::with_capacity(indices.len() * 3);
        for &i in indices {
            inputs.extend_from_slice(self.input_row(i));
            targets.extend_from_slice(self.target_row(i));
        }
        (
            Tensor::from_parts(vec![indices.len(), 1, self.window_len], inputs),
            Tensor::from_parts(vec![indices.len(), 3], targets),
        )
    }

    /// Applies a seeded permutation to the rows.
    pub fn shuffle(&mut self, seed: u64) {
        let mut order: Vec<usize> = (0..self.rows()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut inputs = Vec::with_capacity(self.inputs.len());
        let mut targets = Vec::with_capacity(self.targets.len());
        let mut starts = Vec::with_capacity(self.starts.len());
        for &i in &order {
            inputs.extend_from_slice(self.input_row(i));
            targets.extend_from_slice(self.target_row(i));
            starts.push(self.starts[i]);
        }
        self.inputs = inputs;
        self.targets = targets;
        self.starts = starts;
    }
}

/// Index of the mid-point target: floor((L - 1) / 2), i.e. 499 for L=1000.
pub fn mid_index(window_len: usize) -> usize {
    (window_len - 1) / 2
}

/// (first, mid, last) of an appliance window.
pub fn extract_targets(window: &[f64], window_len: usize) -> Result<(f64, f64, f64), WindowError> {
    if window.len() != window_len {
        return Err(WindowError::WrongWindowLength {
            expected: window_len,
            got: window.len(),
        });
    }
    Ok((
        window[0],
        window[mid_index(window_len)],
        window[window_len - 1],
    ))
}

/// Generates windows at S, S+offset, S+2*offset, ... until the budget is
/// reached or the data is exhausted, whichever comes first.
pub fn build_windows(
    aggregate: &[f64],
    appliance: &[f64],
    config: &WindowConfig,
) -> Result<WindowBatch, WindowError> {
    config.validate()?;
    if aggregate.len() != appliance.len() {
        return Err(WindowError::ColumnMismatch {
            aggregate: aggregate.len(),
            appliance: appliance.len(),
        });
    }
    let len = aggregate.len();
    let l = config.window_len;
    if len < l || config.start > len - l {
        return Err(WindowError::DataTooShort {
            len,
            window_len: l,
        });
    }
    let available = (len - l - config.start) / config.offset + 1;
    let rows = available.min(config.budget);
    let mut inputs = Vec::with_capacity(rows * l);
    let mut targets = Vec::with_capacity(rows * 3);
    let mut starts = Vec::with_capacity(rows);
    let mid = mid_index(l);
    let mut s = config.start;
    for _ in 0..rows {
        inputs.extend_from_slice(&aggregate[s..s + l]);
        let app = &appliance[s..s + l];
        targets.extend_from_slice(&[app[0], app[mid], app[l - 1]]);
        starts.push(s);
        s += config.offset;
    }
    Ok(WindowBatch {
        window_len: l,
        inputs,
        targets,
        starts,
    })
}

const CACHE_MAGIC: &[u8; 8] = b"NILMWCH1";

/// Writes the window cache: magic, config hash, row count, window length,
/// then starts, inputs, and targets.
pub fn save_window_cache(
    path: &Path,
    batch: &WindowBatch,
    config: &WindowConfig,
) -> Result<(), WindowError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&config.hash())?;
    w.write_all(&(batch.rows() as u64).to_le_bytes())?;
    w.write_all(&(batch.window_len as u64).to_le_bytes())?;
    for &s in &batch.starts {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for &v in &batch.inputs {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in &batch.targets {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a cache written by [`save_window_cache`]. Returns `Ok(None)` when
/// the stored config hash does not match `config` (cache invalidated).
pub fn load_window_cache(
    path: &Path,
    config: &WindowConfig,
) -> Result<Option<WindowBatch>, WindowError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(WindowError::Corrupt("bad magic".into()));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    if hash != config.hash() {
        return Ok(None);
    }
    let rows = read_u64(&mut r)? as usize;
    let window_len = read_u64(&mut r)? as usize;
    if window_len != config.window_len {
        return Err(WindowError::Corrupt("window length mismatch".into()));
    }
    let mut starts = Vec::with_capacity(rows);
    for _ in 0..rows {
        starts.push(read_u64(&mut r)? as usize);
    }
    let mut inputs = vec![0.0; rows * window_len];
    read_f64s(&mut r, &mut inputs)?;
    let mut targets = vec![0.0; rows * 3];
    read_f64s(&mut r, &mut targets)?;
    Ok(Some(WindowBatch {
        window_len,
        inputs,
        targets,
        starts,
    }))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, WindowError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, out: &mut [f64]) -> Result<(), WindowError> {
    let mut b = [0u8; 8];
    for v in out.iter_mut() {
        r.read_exact(&mut b)?;
        *v = f64::from_le_bytes(b);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_count_matches_update_rule() {
        let data: Vec<f64> = (0..1070).map(|i| i as f64).collect();
        let cfg = WindowConfig {
            start: 0,
            window_len: 1000,
            budget: 20_000,
            offset: 35,
        };
        let batch = build_windows(&data, &data, &cfg).unwrap();
        assert_eq!(batch.rows(), 3);
        assert_eq!(batch.starts(), &[0, 35, 70]);
    }

    #[test]
    fn budget_caps_row_count() {
        let data: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let cfg = WindowConfig {
            start: 0,
            window_len: 10,
            budget: 5,
            offset: 1,
        };
        let batch = build_windows(&data, &data, &cfg).unwrap();
        assert_eq!(batch.rows(), 5);
    }

    #[test]
    fn count_formula_when_data_runs_out() {
        let data = vec![0.0; 100];
        let cfg = WindowConfig {
            start: 0,
            window_len: 30,
            budget: 1_000,
            offset: 7,
        };
        let batch = build_windows(&data, &data, &cfg).unwrap();
        assert_eq!(batch.rows(), (100 - 30) / 7 + 1);
    }

    #[test]
    fn too_short_data_is_an_error() {
        let data = vec![0.0; 999];
        let cfg = WindowConfig {
            start: 0,
            window_len: 1000,
            budget: 1,
            offset: 1,
        };
        assert!(matches!(
            build_windows(&data, &data, &cfg),
            Err(WindowError::DataTooShort { .. })
        ));
    }

    #[test]
    fn targets_are_first_mid_last() {
        let (f, m, l) = extract_targets(&[1.0, 2.0, 3.0, 4.0, 5.0], 5).unwrap();
        assert_eq!((f, m, l), (1.0, 3.0, 5.0));
        assert_eq!(mid_index(1000), 499);
        let c = extract_targets(&[7.0, 7.0, 7.0], 3).unwrap();
        assert_eq!(c, (7.0, 7.0, 7.0));
    }

    #[test]
    fn rows_are_resliceable_from_source() {
        let aggregate: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let appliance: Vec<f64> = (0..60).map(|i| (i as f64).cos()).collect();
        let cfg = WindowConfig {
            start: 0,
            window_len: 20,
            budget: 100,
            offset: 6,
        };
        let batch = build_windows(&aggregate, &appliance, &cfg).unwrap();
        for i in 0..batch.rows() {
            let s = batch.starts()[i];
            assert_eq!(batch.input_row(i), &aggregate[s..s + 20]);
            let t = batch.target_row(i);
            let app = &appliance[s..s + 20];
            assert_eq!(t, &[app[0], app[mid_index(20)], app[19]]);
        }
    }

    #[test]
    fn shuffle_is_seeded_and_preserves_rows() {
        let data: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let cfg = WindowConfig {
            start: 0,
            window_len: 10,
            budget: 100,
            offset: 10,
        };
        let mut a = build_windows(&data, &data, &cfg).unwrap();
        let mut b = a.clone();
        a.shuffle(7);
        b.shuffle(7);
        assert_eq!(a, b);
        let mut c = build_windows(&data, &data, &cfg).unwrap();
        c.shuffle(8);
        assert_ne!(a.starts(), c.starts());
        // Rows still reslice after shuffling.
        for i in 0..a.rows() {
            let s = a.starts()[i];
            assert_eq!(a.input_row(i), &data[s..s + 10]);
        }
    }

    #[test]
    fn cache_round_trip_and_invalidation() {
        let data: Vec<f64> = (0..100).map(|i| i as f64 * 0.5).collect();
        let cfg = WindowConfig {
            start: 0,
            window_len: 10,
            budget: 100,
            offset: 5,
        };
        let batch = build_windows(&data, &data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("windows.bin");
        save_window_cache(&path, &batch, &cfg).unwrap();
        let loaded = load_window_cache(&path, &cfg).unwrap().unwrap();
        assert_eq!(loaded, batch);
        let other = WindowConfig { offset: 6, ..cfg };
        assert!(load_window_cache(&path, &other).unwrap().is_none());
    }
}
