//! Sliding-window image generation: slices [S_p, S_p + Max_r) advance by
//! the data offset D_o for at most It_m iterations or until the end pointer
//! leaves the data.

use super::cwt::{mexican_hat_cwt, CwtConfig};
use super::image::{fuse_images, render_image, Provenance, SpectrogramImage, TransformKind};
use super::stft::{stft_spectrogram, StftConfig};
use super::SignatureError;

/// Max_r: window length in data points; D_o: offset in points; It_m: the
/// iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlidingConfig {
    pub max_r: usize,
    pub data_offset: usize,
    pub max_iters: usize,
}

impl Default for SlidingConfig {
    /// 300-point windows with half-window overlap.
    fn default() -> Self {
        Self {
            max_r: 300,
            data_offset: 150,
            max_iters: usize::MAX,
        }
    }
}

impl SlidingConfig {
    fn validate(&self) -> Result<(), SignatureError> {
        if self.max_r < 2 {
            return Err(SignatureError::BadConfig("Max_r must be >= 2".into()));
        }
        if self.data_offset == 0 || self.data_offset > self.max_r {
            return Err(SignatureError::BadConfig(format!(
                "data offset {} must be in 1..=Max_r ({})",
                self.data_offset, self.max_r
            )));
        }
        Ok(())
    }
}

/// Parameters shared by one generation run.
#[derive(Debug, Clone)]
pub struct SlidingContext<'a> {
    pub house: &'a str,
    pub channel: &'a str,
    pub label: &'a str,
    pub cwt: CwtConfig,
    pub stft: StftConfig,
    pub out_w: usize,
    pub out_h: usize,
    /// Ids are assigned sequentially from this value.
    pub first_id: u64,
}

/// Generates one image per slice of `readings`, with provenance recorded.
pub fn sliding_spectrogram_dataset(
    readings: &[f64],
    config: &SlidingConfig,
    kind: TransformKind,
    ctx: &SlidingContext<'_>,
) -> Result<Vec<SpectrogramImage>, SignatureError> {
    config.validate()?;
    if readings.len() < config.max_r {
        return Err(SignatureError::DataTooShort {
            len: readings.len(),
            needed: config.max_r,
        });
    }
    let mut images = Vec::new();
    let mut start = 0usize;
    for i in 0..config.max_iters {
        let end = start + config.max_r;
        if end > readings.len() {
            break;
        }
        let slice = &readings[start..end];
        let provenance = Provenance {
            house: ctx.house.to_string(),
            channel: ctx.channel.to_string(),
            start,
        };
        let mut img = transform_slice(slice, kind, ctx, provenance)?;
        img.id = ctx.first_id + i as u64;
        img.ancestor = img.id;
        images.push(img);
        start += config.data_offset;
    }
    Ok(images)
}

fn transform_slice(
    slice: &[f64],
    kind: TransformKind,
    ctx: &SlidingContext<'_>,
    provenance: Provenance,
) -> Result<SpectrogramImage, SignatureError> {
    match kind {
        TransformKind::Wavelet => {
            let m = mexican_hat_cwt(slice, &ctx.cwt)?;
            render_image(&m, ctx.out_w, ctx.out_h, kind, ctx.label, provenance)
        }
        TransformKind::Stft => {
            let m = stft_spectrogram(slice, &ctx.stft)?;
            render_image(&m, ctx.out_w, ctx.out_h, kind, ctx.label, provenance)
        }
        TransformKind::Fused => {
            let wavelet = mexican_hat_cwt(slice, &ctx.cwt)?;
            let stft = stft_spectrogram(slice, &ctx.stft)?;
            let a = render_image(
                &wavelet,
                ctx.out_w,
                ctx.out_h,
                TransformKind::Wavelet,
                ctx.label,
                provenance.clone(),
            )?;
            let b = render_image(
                &stft,
                ctx.out_w,
                ctx.out_h,
                TransformKind::Stft,
                ctx.label,
                provenance,
            )?;
            fuse_images(&a, &b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(first_id: u64) -> SlidingContext<'static> {
        SlidingContext {
            house: "h1",
            channel: "5",
            label: "refrigerator",
            cwt: CwtConfig::new(1, 10).unwrap(),
            stft: StftConfig {
                segment_len: 32,
                hop: 16,
                window: super::super::stft::WindowFn::Hann,
            },
            out_w: 56,
            out_h: 34,
            first_id,
        }
    }

    fn readings(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * 0.21).sin() * 50.0 + 60.0).collect()
    }

    #[test]
    fn slice_arithmetic_matches_loop_rule() {
        let cfg = SlidingConfig {
            max_r: 100,
            data_offset: 50,
            max_iters: 10,
        };
        let images =
            sliding_spectrogram_dataset(&readings(250), &cfg, TransformKind::Wavelet, &ctx(0))
                .unwrap();
        assert_eq!(images.len(), 4);
        let starts: Vec<usize> = images.iter().map(|i| i.provenance.start).collect();
        assert_eq!(starts, vec![0, 50, 100, 150]);
        let ids: Vec<u64> = images.iter().map(|i| i.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        assert!(images.iter().all(|i| i.ancestor == i.id && !i.augmented));
    }

    #[test]
    fn iteration_cap_limits_output() {
        let cfg = SlidingConfig {
            max_r: 100,
            data_offset: 50,
            max_iters: 2,
        };
        let images =
            sliding_spectrogram_dataset(&readings(1000), &cfg, TransformKind::Stft, &ctx(7))
                .unwrap();
        assert_eq!(images.len(), 2);
        assert_eq!(images[0].id, 7);
        let zero_cap = SlidingConfig { max_iters: 0, ..cfg };
        let none =
            sliding_spectrogram_dataset(&readings(1000), &zero_cap, TransformKind::Stft, &ctx(0))
                .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn short_data_is_an_error() {
        let cfg = SlidingConfig {
            max_r: 100,
            data_offset: 50,
            max_iters: 10,
        };
        assert!(matches!(
            sliding_spectrogram_dataset(&readings(99), &cfg, TransformKind::Wavelet, &ctx(0)),
            Err(SignatureError::DataTooShort { .. })
        ));
    }

    #[test]
    fn fused_kind_produces_fused_images() {
        let cfg = SlidingConfig {
            max_r: 64,
            data_offset: 64,
            max_iters: 3,
        };
        let images =
            sliding_spectrogram_dataset(&readings(200), &cfg, TransformKind::Fused, &ctx(0))
                .unwrap();
        assert_eq!(images.len(), 3);
        for img in &images {
            assert_eq!(img.kind, TransformKind::Fused);
            assert_eq!((img.width, img.height), (56, 34));
            assert!(img.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
