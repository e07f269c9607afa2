//! Continuous wavelet transform with the Mexican-hat (Ricker) mother
//! wavelet.
//!
//! Row s of the output is the window convolved with the wavelet dilated by
//! integer scale s: psi(t) = (2 / (sqrt(3) * pi^(1/4))) * (1 - t^2) *
//! exp(-t^2 / 2), sampled at t = (i - j) / s and truncated at |t| <= 5.
//! The sampled kernel is re-centered to zero mean over each output
//! position's in-window support, so the continuous wavelet's zero-mean
//! property holds exactly in the discrete transform: constants map to 0 at
//! every position and scale.

use super::{Matrix, SignatureError};

/// Inclusive integer scale range for the CWT; the full range is 1-500.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CwtConfig {
    pub scale_min: usize,
    pub scale_max: usize,
}

impl Default for CwtConfig {
    fn default() -> Self {
        Self {
            scale_min: 1,
            scale_max: 500,
        }
    }
}

impl CwtConfig {
    pub fn new(scale_min: usize, scale_max: usize) -> Result<Self, SignatureError> {
        if scale_min < 1 || scale_max > 500 || scale_min > scale_max {
            return Err(SignatureError::BadConfig(format!(
                "scale range {scale_min}..={scale_max} must lie within 1..=500"
            )));
        }
        Ok(Self {
            scale_min,
            scale_max,
        })
    }

    pub fn scale_count(&self) -> usize {
        self.scale_max - self.scale_min + 1
    }
}

/// The normalized Ricker wavelet value at time t.
pub fn ricker(t: f64) -> f64 {
    const AMPLITUDE: f64 = 0.867_325_070_584_077_6; // 2 / (sqrt(3) * pi^(1/4))
    AMPLITUDE * (1.0 - t * t) * (-t * t / 2.0).exp()
}

/// Computes the scalogram: one row per scale, one column per window sample.
pub fn mexican_hat_cwt(window: &[f64], config: &CwtConfig) -> Result<Matrix, SignatureError> {
    if window.is_empty() {
        return Err(SignatureError::EmptyWindow);
    }
    if window.len() < 2 {
        return Err(SignatureError::DataTooShort {
            len: window.len(),
            needed: 2,
        });
    }
    let w = window.len();
    let mut out = Matrix::zeros(config.scale_count(), w);

    // Prefix sums of the window for O(1) windowed sums.
    let mut x_prefix = vec![0.0; w + 1];
    for (i, &x) in window.iter().enumerate() {
        x_prefix[i + 1] = x_prefix[i] + x;
    }

    for (row, scale) in (config.scale_min..=config.scale_max).enumerate() {
        let s = scale as f64;
        let half = 5 * scale;
        // Kernel values for displacement d = i - j in [-reach, reach].
        let reach = half.min(w - 1);
        let mut kernel = vec![0.0; 2 * reach + 1];
        for (idx, k) in kernel.iter_mut().enumerate() {
            let d = idx as isize - reach as isize;
            *k = ricker(d as f64 / s);
        }
        let mut k_prefix = vec![0.0; kernel.len() + 1];
        for (i, &k) in kernel.iter().enumerate() {
            k_prefix[i + 1] = k_prefix[i] + k;
        }

        for i in 0..w {
            let j_lo = i.saturating_sub(half);
            let j_hi = (i + half).min(w - 1);
            // Convolution term over the in-window support.
            let mut conv = 0.0;
            for (j, &x) in window[j_lo..=j_hi].iter().enumerate() {
                let d = i as isize - (j_lo + j) as isize;
                conv += x * kernel[(d + reach as isize) as usize];
            }
            // Zero-mean correction: subtract the clipped-kernel mean times
            // the windowed sum of the signal.
            let d_hi = (i as isize - j_lo as isize + reach as isize) as usize;
            let d_lo = (i as isize - j_hi as isize + reach as isize) as usize;
            let count = (j_hi - j_lo + 1) as f64;
            let k_sum = k_prefix[d_hi + 1] - k_prefix[d_lo];
            let x_sum = x_prefix[j_hi + 1] - x_prefix[j_lo];
            out.set(row, i, conv - k_sum / count * x_sum);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force reference: evaluates the wavelet per (i, j) pair and
    /// subtracts the naive clipped-kernel mean, with no prefix sums or
    /// precomputed kernels.
    fn cwt_direct(window: &[f64], config: &CwtConfig) -> Matrix {
        let w = window.len();
        let mut out = Matrix::zeros(config.scale_count(), w);
        for (row, scale) in (config.scale_min..=config.scale_max).enumerate() {
            let s = scale as f64;
            let half = (5 * scale) as isize;
            for i in 0..w {
                let mut kernel_vals = Vec::new();
                let mut xs = Vec::new();
                for j in 0..w {
                    let d = i as isize - j as isize;
                    if d.abs() <= half {
                        kernel_vals.push(ricker(d as f64 / s));
                        xs.push(window[j]);
                    }
                }
                let mean: f64 = kernel_vals.iter().sum::<f64>() / kernel_vals.len() as f64;
                let mut acc = 0.0;
                for (k, x) in kernel_vals.iter().zip(&xs) {
                    acc += x * (k - mean);
                }
                out.set(row, i, acc);
            }
        }
        out
    }

    #[test]
    fn ricker_peak_and_zero_crossings() {
        assert!((ricker(0.0) - 2.0 / (3.0f64.sqrt() * std::f64::consts::PI.powf(0.25))).abs() < 1e-15);
        assert!(ricker(1.0).abs() < 1e-15);
        assert!(ricker(-1.0).abs() < 1e-15);
        assert!(ricker(2.0) < 0.0);
    }

    #[test]
    fn constant_window_maps_to_zero_at_every_scale() {
        let window = vec![7.5; 64];
        let cfg = CwtConfig::new(1, 40).unwrap();
        let m = mexican_hat_cwt(&window, &cfg).unwrap();
        for (row, scale) in (cfg.scale_min..=cfg.scale_max).enumerate() {
            for col in 0..64 {
                let v = m.at(row, col).abs();
                assert!(v <= 1e-9 * scale as f64, "scale {scale} col {col}: {v}");
            }
        }
    }

    #[test]
    fn full_scale_range_yields_500_rows() {
        let window: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let m = mexican_hat_cwt(&window, &CwtConfig::default()).unwrap();
        assert_eq!(m.rows, 500);
        assert_eq!(m.cols, 16);
    }

    #[test]
    fn matches_direct_sum_reference() {
        let window: Vec<f64> = (0..48)
            .map(|i| (i as f64 * 0.31).sin() * 2.0 + (i as f64 * 0.07).cos())
            .collect();
        let cfg = CwtConfig::new(1, 25).unwrap();
        let fast = mexican_hat_cwt(&window, &cfg).unwrap();
        let slow = cwt_direct(&window, &cfg);
        for r in 0..fast.rows {
            for c in 0..fast.cols {
                let (a, b) = (fast.at(r, c), slow.at(r, c));
                assert!(
                    (a - b).abs() <= 1e-9 * b.abs().max(1.0),
                    "({r},{c}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn impulse_reproduces_the_wavelet_shape() {
        // With an impulse at p the row is psi((i - p)/s) minus the
        // documented per-position mean correction.
        let mut window = vec![0.0; 41];
        window[20] = 1.0;
        let cfg = CwtConfig::new(3, 3).unwrap();
        let m = mexican_hat_cwt(&window, &cfg).unwrap();
        let direct = cwt_direct(&window, &cfg);
        for i in 0..41 {
            assert!((m.at(0, i) - direct.at(0, i)).abs() < 1e-12);
        }
        // The peak sits at the impulse and matches psi(0) up to the small
        // mean correction.
        let peak = m.at(0, 20);
        assert!((peak - ricker(0.0)).abs() < 1e-2);
        // Symmetry of the Ricker: the response is even around position 20.
        for off in 1..15usize {
            assert!((m.at(0, 20 - off) - m.at(0, 20 + off)).abs() < 1e-12);
        }
    }

    #[test]
    fn linearity_holds() {
        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.4).sin()).collect();
        let y: Vec<f64> = (0..32).map(|i| (i as f64 * 0.9).cos() * 1.5).collect();
        let (a, b) = (2.25, -0.75);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let cfg = CwtConfig::new(1, 12).unwrap();
        let mx = mexican_hat_cwt(&x, &cfg).unwrap();
        let my = mexican_hat_cwt(&y, &cfg).unwrap();
        let mc = mexican_hat_cwt(&combo, &cfg).unwrap();
        for r in 0..mc.rows {
            for c in 0..mc.cols {
                let expected = a * mx.at(r, c) + b * my.at(r, c);
                assert!(
                    (mc.at(r, c) - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                    "({r},{c})"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            mexican_hat_cwt(&[], &CwtConfig::default()),
            Err(SignatureError::EmptyWindow)
        ));
        assert!(CwtConfig::new(0, 10).is_err());
        assert!(CwtConfig::new(1, 501).is_err());
        assert!(CwtConfig::new(7, 3).is_err());
    }
}
