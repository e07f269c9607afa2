//! Short-time Fourier transform magnitudes.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Matrix, SignatureError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowFn {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub segment_len: usize,
    pub hop: usize,
    pub window: WindowFn,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            segment_len: 64,
            hop: 32,
            window: WindowFn::Hann,
        }
    }
}

impl StftConfig {
    fn validate(&self) -> Result<(), SignatureError> {
        if self.segment_len < 2 {
            return Err(SignatureError::BadConfig(
                "segment length must be >= 2".into(),
            ));
        }
        if self.hop == 0 || self.hop > self.segment_len {
            return Err(SignatureError::BadConfig(format!(
                "hop {} must be in 1..=segment length {}",
                self.hop, self.segment_len
            )));
        }
        Ok(())
    }

    /// One-sided spectrum height: N/2 + 1 bins.
    pub fn freq_bins(&self) -> usize {
        self.segment_len / 2 + 1
    }
}

fn window_coefficients(cfg: &StftConfig) -> Vec<f64> {
    let n = cfg.segment_len;
    match cfg.window {
        WindowFn::Rectangular => vec![1.0; n],
        WindowFn::Hann => (0..n)
            .map(|i| {
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            })
            .collect(),
    }
}

/// Magnitude spectrogram: rows are the one-sided frequency bins (DC at row
/// 0), columns are frames taken every `hop` samples.
pub fn stft_spectrogram(signal: &[f64], config: &StftConfig) -> Result<Matrix, SignatureError> {
    config.validate()?;
    let n = config.segment_len;
    if signal.len() < n {
        return Err(SignatureError::DataTooShort {
            len: signal.len(),
            needed: n,
        });
    }
    let frames = (signal.len() - n) / config.hop + 1;
    let bins = config.freq_bins();
    let window = window_coefficients(config);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut out = Matrix::zeros(bins, frames);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for frame in 0..frames {
        let start = frame * config.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(signal[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (bin, b) in buf.iter().take(bins).enumerate() {
            out.set(bin, frame, b.norm());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Naive direct-sum DFT magnitude of one windowed segment.
    fn dft_magnitudes(segment: &[f64]) -> Vec<f64> {
        let n = segment.len();
        let bins = n / 2 + 1;
        let mut out = Vec::with_capacity(bins);
        for k in 0..bins {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, &x) in segment.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                re += x * phase.cos();
                im += x * phase.sin();
            }
            out.push((re * re + im * im).sqrt());
        }
        out
    }

    #[test]
    fn matches_naive_dft_for_small_segments() {
        let signal: Vec<f64> = (0..200)
            .map(|i| (i as f64 * 0.17).sin() + 0.3 * (i as f64 * 1.1).cos())
            .collect();
        for segment_len in [8usize, 16, 32, 64] {
            let cfg = StftConfig {
                segment_len,
                hop: segment_len / 2,
                window: WindowFn::Rectangular,
            };
            let m = stft_spectrogram(&signal, &cfg).unwrap();
            for frame in 0..m.cols {
                let start = frame * cfg.hop;
                let reference = dft_magnitudes(&signal[start..start + segment_len]);
                for (bin, &r) in reference.iter().enumerate() {
                    let got = m.at(bin, frame);
                    assert!(
                        (got - r).abs() <= 1e-9 * r.abs().max(1.0),
                        "seg {segment_len} frame {frame} bin {bin}: {got} vs {r}"
                    );
                }
            }
        }
    }

    #[test]
    fn pure_sinusoid_peaks_at_its_bin() {
        let n = 32;
        for k in [1usize, 3, 7, 12] {
            let signal: Vec<f64> = (0..n * 4)
                .map(|i| (2.0 * std::f64::consts::PI * k as f64 * i as f64 / n as f64).sin())
                .collect();
            let cfg = StftConfig {
                segment_len: n,
                hop: n,
                window: WindowFn::Rectangular,
            };
            let m = stft_spectrogram(&signal, &cfg).unwrap();
            for frame in 0..m.cols {
                let argmax = (0..m.rows)
                    .max_by(|&a, &b| m.at(a, frame).partial_cmp(&m.at(b, frame)).unwrap())
                    .unwrap();
                assert_eq!(argmax, k, "frame {frame}");
            }
        }
    }

    #[test]
    fn zero_signal_gives_zero_matrix() {
        let cfg = StftConfig {
            segment_len: 16,
            hop: 8,
            window: WindowFn::Hann,
        };
        let m = stft_spectrogram(&[0.0; 64], &cfg).unwrap();
        assert!(m.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parseval_energy_identity_rectangular() {
        let signal: Vec<f64> = (0..96).map(|i| (i as f64 * 0.37).sin() * 1.7).collect();
        let cfg = StftConfig {
            segment_len: 32,
            hop: 16,
            window: WindowFn::Rectangular,
        };
        let m = stft_spectrogram(&signal, &cfg).unwrap();
        let n = cfg.segment_len;
        for frame in 0..m.cols {
            let start = frame * cfg.hop;
            let time_energy: f64 = signal[start..start + n].iter().map(|x| x * x).sum();
            // One-sided spectrum: double the interior bins.
            let mut spec_energy = m.at(0, frame).powi(2) + m.at(n / 2, frame).powi(2);
            for bin in 1..n / 2 {
                spec_energy += 2.0 * m.at(bin, frame).powi(2);
            }
            spec_energy /= n as f64;
            assert!(
                (spec_energy - time_energy).abs() <= 1e-9 * time_energy.max(1.0),
                "frame {frame}: {spec_energy} vs {time_energy}"
            );
        }
    }

    #[test]
    fn window_shorter_than_segment_is_an_error() {
        let cfg = StftConfig::default();
        assert!(matches!(
            stft_spectrogram(&[0.0; 63], &cfg),
            Err(SignatureError::DataTooShort { .. })
        ));
    }

    #[test]
    fn hop_larger_than_segment_is_rejected() {
        let cfg = StftConfig {
            segment_len: 16,
            hop: 17,
            window: WindowFn::Hann,
        };
        assert!(stft_spectrogram(&[0.0; 64], &cfg).is_err());
    }
}
