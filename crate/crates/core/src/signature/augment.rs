//! Label-preserving image augmentation: rotation, shear, and crop-resize,
//! all via inverse-mapped bilinear sampling with out-of-frame pixels set
//! to 0.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::image::SpectrogramImage;
use super::SignatureError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentOp {
    /// Rotation around the image center, in degrees.
    Rotate { degrees: f64 },
    /// Horizontal shear around the center; `factor` is dx per unit dy.
    Shear { factor: f64 },
    /// Crop the given box (pixel units) and resize back to full frame.
    CropResize {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
    },
}

/// Applies one augmentation, keeping the output dimensions. The result is
/// flagged as augmented and keeps the source's ancestor id.
pub fn augment_image(
    img: &SpectrogramImage,
    op: &AugmentOp,
) -> Result<SpectrogramImage, SignatureError> {
    let (w, h) = (img.width, img.height);
    let cx = (w - 1) as f64 / 2.0;
    let cy = (h - 1) as f64 / 2.0;
    let mut pixels = vec![0.0; w * h];
    match *op {
        AugmentOp::Rotate { degrees } => {
            let rad = degrees.to_radians();
            let (sin, cos) = rad.sin_cos();
            for y in 0..h {
                let dy = y as f64 - cy;
                for x in 0..w {
                    let dx = x as f64 - cx;
                    // Inverse rotation of the output grid.
                    let xs = cos * dx + sin * dy + cx;
                    let ys = -sin * dx + cos * dy + cy;
                    pixels[y * w + x] = sample_bilinear(img, xs, ys);
                }
            }
        }
        AugmentOp::Shear { factor } => {
            for y in 0..h {
                let dy = y as f64 - cy;
                for x in 0..w {
                    let xs = x as f64 - factor * dy;
                    pixels[y * w + x] = sample_bilinear(img, xs, y as f64);
                }
            }
        }
        AugmentOp::CropResize { x0, y0, w: bw, h: bh } => {
            if bw == 0 || bh == 0 || x0 + bw > w || y0 + bh > h {
                return Err(SignatureError::DegenerateCrop {
                    x0,
                    y0,
                    w: bw,
                    h: bh,
                    img_w: w,
                    img_h: h,
                });
            }
            for y in 0..h {
                let ys = y0 as f64 + grid_scale(y, h, bh);
                for x in 0..w {
                    let xs = x0 as f64 + grid_scale(x, w, bw);
                    pixels[y * w + x] = sample_bilinear(img, xs, ys);
                }
            }
        }
    }
    Ok(SpectrogramImage {
        pixels,
        augmented: true,
        ..img.clone()
    })
}

fn grid_scale(out_idx: usize, out_len: usize, box_len: usize) -> f64 {
    if out_len <= 1 || box_len <= 1 {
        0.0
    } else {
        out_idx as f64 * (box_len - 1) as f64 / (out_len - 1) as f64
    }
}

fn sample_bilinear(img: &SpectrogramImage, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let at = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= img.width as isize || yi >= img.height as isize {
            0.0
        } else {
            img.pixels[yi as usize * img.width + xi as usize]
        }
    };
    let (xi, yi) = (x0 as isize, y0 as isize);
    at(xi, yi) * (1.0 - fx) * (1.0 - fy)
        + at(xi + 1, yi) * fx * (1.0 - fy)
        + at(xi, yi + 1) * (1.0 - fx) * fy
        + at(xi + 1, yi + 1) * fx * fy
}

/// Draws a random augmentation within the configured label-preserving
/// ranges: rotation in [-15, 15] degrees, shear in [-0.2, 0.2], or a crop
/// of at least 80% of the frame.
pub fn random_augment(
    img: &SpectrogramImage,
    rng: &mut ChaCha8Rng,
) -> Result<SpectrogramImage, SignatureError> {
    let op = match rng.random_range(0..3u8) {
        0 => AugmentOp::Rotate {
            degrees: rng.random_range(-15.0..15.0),
        },
        1 => AugmentOp::Shear {
            factor: rng.random_range(-0.2..0.2),
        },
        _ => {
            let bw = rng.random_range((img.width * 4 / 5)..=img.width);
            let bh = rng.random_range((img.height * 4 / 5)..=img.height);
            let x0 = rng.random_range(0..=img.width - bw);
            let y0 = rng.random_range(0..=img.height - bh);
            AugmentOp::CropResize { x0, y0, w: bw, h: bh }
        }
    };
    augment_image(img, &op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::image::{Provenance, TransformKind};
    use rand::SeedableRng;

    fn test_image(w: usize, h: usize) -> SpectrogramImage {
        SpectrogramImage {
            width: w,
            height: h,
            pixels: (0..w * h).map(|i| (i % 17) as f64 / 16.0).collect(),
            kind: TransformKind::Wavelet,
            label: "x".into(),
            provenance: Provenance::default(),
            augmented: false,
            id: 3,
            ancestor: 3,
        }
    }

    #[test]
    fn rotate_zero_is_bit_exact_identity() {
        let img = test_image(56, 34);
        let out = augment_image(&img, &AugmentOp::Rotate { degrees: 0.0 }).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out.pixels), bits(&img.pixels));
        assert!(out.augmented);
        assert_eq!(out.ancestor, img.ancestor);
    }

    #[test]
    fn rotate_180_twice_recovers_original() {
        let img = test_image(20, 14);
        let once = augment_image(&img, &AugmentOp::Rotate { degrees: 180.0 }).unwrap();
        let twice = augment_image(&once, &AugmentOp::Rotate { degrees: 180.0 }).unwrap();
        for (a, b) in img.pixels.iter().zip(&twice.pixels) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn full_frame_crop_is_identity() {
        let img = test_image(56, 34);
        let out = augment_image(
            &img,
            &AugmentOp::CropResize {
                x0: 0,
                y0: 0,
                w: 56,
                h: 34,
            },
        )
        .unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out.pixels), bits(&img.pixels));
    }

    #[test]
    fn shear_zero_is_identity_and_nonzero_moves_pixels() {
        let img = test_image(30, 20);
        let same = augment_image(&img, &AugmentOp::Shear { factor: 0.0 }).unwrap();
        assert_eq!(same.pixels, img.pixels);
        let moved = augment_image(&img, &AugmentOp::Shear { factor: 0.2 }).unwrap();
        assert_ne!(moved.pixels, img.pixels);
        assert!(moved.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn degenerate_crop_is_rejected() {
        let img = test_image(10, 10);
        for bad in [
            AugmentOp::CropResize { x0: 0, y0: 0, w: 0, h: 5 },
            AugmentOp::CropResize { x0: 8, y0: 0, w: 5, h: 5 },
        ] {
            assert!(matches!(
                augment_image(&img, &bad),
                Err(SignatureError::DegenerateCrop { .. })
            ));
        }
    }

    #[test]
    fn random_augment_is_seeded() {
        let img = test_image(56, 34);
        let a = random_augment(&img, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = random_augment(&img, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.pixels, b.pixels);
        assert!(a.augmented);
    }

    #[test]
    fn out_of_frame_pixels_are_zero() {
        // A bright image rotated 45 degrees must have dark corners.
        let img = SpectrogramImage {
            pixels: vec![1.0; 24 * 24],
            ..test_image(24, 24)
        };
        let out = augment_image(&img, &AugmentOp::Rotate { degrees: 45.0 }).unwrap();
        assert!(out.pixels[0] < 0.5);
        assert!(out.pixels[23] < 0.5);
    }
}
