//! Stitching per-window 3-point predictions back into one series: each
//! covered position takes the mean of every window prediction that lands on
//! it; uncovered positions stay absent.

use super::NilmError;
use crate::nn::Network;
use crate::windowing::{build_windows, mid_index, WindowConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct StitchedSeries {
    /// Per-position estimate; `None` where no window prediction landed.
    pub values: Vec<Option<f64>>,
    /// Number of (window, target-slot) predictions per position.
    pub coverage: Vec<usize>,
}

impl StitchedSeries {
    pub fn covered_positions(&self) -> usize {
        self.coverage.iter().filter(|&&c| c > 0).count()
    }

    pub fn total_predictions(&self) -> usize {
        self.coverage.iter().sum()
    }
}

/// Runs the network over sliding windows of `aggregate` (already
/// normalized) and scatters the (first, mid, last) predictions back onto
/// series positions.
pub fn predict_series(
    network: &Network,
    aggregate: &[f64],
    config: &WindowConfig,
) -> Result<StitchedSeries, NilmError> {
    // Targets are not consumed here; reuse the aggregate as a placeholder
    // second column.
    let windows = build_windows(aggregate, aggregate, config)?;
    let l = config.window_len;
    let mid = mid_index(l);
    let mut sums = vec![0.0; aggregate.len()];
    let mut coverage = vec![0usize; aggregate.len()];
    const CHUNK: usize = 128;
    let mut row = 0;
    while row < windows.rows() {
        let end = (row + CHUNK).min(windows.rows());
        let x = windows.input_tensor(row..end);
        let out = network.forward(&x)?;
        for (i, &start) in windows.starts()[row..end].iter().enumerate() {
            for (slot, offset) in [(0usize, 0usize), (1, mid), (2, l - 1)] {
                let pos = start + offset;
                sums[pos] += out.data()[i * 3 + slot];
                coverage[pos] += 1;
            }
        }
        row = end;
    }
    let values = sums
        .iter()
        .zip(&coverage)
        .map(|(&s, &c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    Ok(StitchedSeries { values, coverage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseSpec, LayerOp, NetworkBuilder};
    use crate::nn::{Conv1dSpec, Network};

    /// A network that always outputs the same constant triple, regardless of
    /// input: one conv that zeroes everything, then a biased dense layer.
    fn constant_net(window_len: usize, value: f64) -> Network {
        let mut net = NetworkBuilder::new(0)
            .conv1d(Conv1dSpec::new(1, 1, 1, 1, 0).unwrap(), false)
            .flatten()
            .dense(DenseSpec::new(window_len, 3, Activation::None).unwrap())
            .build();
        for layer in net.layers_mut() {
            if let Some((w, b)) = layer.params_mut() {
                w.data_mut().fill(0.0);
                b.data_mut().fill(value);
            }
        }
        if let LayerOp::Conv1d { bias, .. } = &mut net.layers_mut()[0].op {
            bias.data_mut().fill(0.0);
        }
        net
    }

    #[test]
    fn non_overlapping_windows_cover_once() {
        let net = constant_net(4, 2.5);
        let aggregate = vec![1.0; 12];
        let cfg = WindowConfig {
            start: 0,
            window_len: 4,
            budget: 100,
            offset: 4,
        };
        let stitched = predict_series(&net, &aggregate, &cfg).unwrap();
        // 3 windows x 3 slots = 9 predictions; mid_index(4) = 1.
        assert_eq!(stitched.total_predictions(), 9);
        for (i, c) in stitched.coverage.iter().enumerate() {
            let within = [0usize, 1, 3, 4, 5, 7, 8, 9, 11].contains(&i);
            assert_eq!(*c, usize::from(within), "position {i}");
        }
        for v in stitched.values.iter().flatten() {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn overlapping_identical_predictions_average_to_same() {
        let net = constant_net(4, -1.25);
        let aggregate = vec![0.0; 10];
        let cfg = WindowConfig {
            start: 0,
            window_len: 4,
            budget: 100,
            offset: 1,
        };
        let stitched = predict_series(&net, &aggregate, &cfg).unwrap();
        assert_eq!(stitched.total_predictions(), 7 * 3);
        for v in stitched.values.iter().flatten() {
            assert!((v + 1.25).abs() < 1e-12);
        }
        // Every position of a fully swept series is covered.
        assert_eq!(stitched.covered_positions(), 10);
    }

    #[test]
    fn coverage_matches_brute_force_recount() {
        let net = constant_net(6, 0.0);
        let aggregate = vec![0.0; 23];
        let cfg = WindowConfig {
            start: 0,
            window_len: 6,
            budget: 100,
            offset: 4,
        };
        let stitched = predict_series(&net, &aggregate, &cfg).unwrap();
        let mut expected = vec![0usize; 23];
        let mut s = 0;
        while s + 6 <= 23 {
            for off in [0, mid_index(6), 5] {
                expected[s + off] += 1;
            }
            s += 4;
        }
        assert_eq!(stitched.coverage, expected);
        assert_eq!(
            stitched.total_predictions(),
            expected.iter().sum::<usize>()
        );
    }

    #[test]
    fn short_series_is_an_error() {
        let net = constant_net(8, 0.0);
        let cfg = WindowConfig {
            start: 0,
            window_len: 8,
            budget: 1,
            offset: 1,
        };
        assert!(predict_series(&net, &[0.0; 7], &cfg).is_err());
    }
}
