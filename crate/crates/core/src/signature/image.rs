//! Rendering transform matrices into fixed-size grayscale images, pixel-wise
//! fusion, and 8-bit PNG storage.

use std::path::Path;

use image::{GrayImage, ImageReader, Luma};

use super::{Matrix, SignatureError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Wavelet,
    Stft,
    Fused,
}

impl TransformKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransformKind::Wavelet => "wavelet",
            TransformKind::Stft => "stft",
            TransformKind::Fused => "fused",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wavelet" => Some(TransformKind::Wavelet),
            "stft" => Some(TransformKind::Stft),
            "fused" => Some(TransformKind::Fused),
            _ => None,
        }
    }
}

/// Which house/channel slice an image came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub house: String,
    pub channel: String,
    pub start: usize,
}

/// Grayscale signature image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, height x width.
    pub pixels: Vec<f64>,
    pub kind: TransformKind,
    pub label: String,
    pub provenance: Provenance,
    pub augmented: bool,
    /// Stable id within one generation run.
    pub id: u64,
    /// Id of the original this image descends from (== id for originals).
    pub ancestor: u64,
}

impl SpectrogramImage {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Min-max normalizes the matrix to [0, 1] (a constant matrix maps to 0.5
/// everywhere) and resamples it to `out_w` x `out_h` bilinearly.
pub fn render_image(
    matrix: &Matrix,
    out_w: usize,
    out_h: usize,
    kind: TransformKind,
    label: &str,
    provenance: Provenance,
) -> Result<SpectrogramImage, SignatureError> {
    if !matrix.is_finite() {
        return Err(SignatureError::NonFiniteMatrix);
    }
    if matrix.rows == 0 || matrix.cols == 0 || out_w == 0 || out_h == 0 {
        return Err(SignatureError::BadConfig(
            "matrix and output dimensions must be non-zero".into(),
        ));
    }
    let min = matrix.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = matrix.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let normalized: Vec<f64> = if max > min {
        let span = max - min;
        matrix.data.iter().map(|v| (v - min) / span).collect()
    } else {
        vec![0.5; matrix.data.len()]
    };

    let mut pixels = vec![0.0; out_w * out_h];
    for oy in 0..out_h {
        let yf = grid_map(oy, out_h, matrix.rows);
        for ox in 0..out_w {
            let xf = grid_map(ox, out_w, matrix.cols);
            pixels[oy * out_w + ox] =
                bilinear(&normalized, matrix.cols, matrix.rows, xf, yf);
        }
    }
    Ok(SpectrogramImage {
        width: out_w,
        height: out_h,
        pixels,
        kind,
        label: label.to_string(),
        provenance,
        augmented: false,
        id: 0,
        ancestor: 0,
    })
}

/// Align-corners grid mapping from an output index to source coordinates.
fn grid_map(out_idx: usize, out_len: usize, src_len: usize) -> f64 {
    if out_len <= 1 || src_len <= 1 {
        0.0
    } else {
        out_idx as f64 * (src_len - 1) as f64 / (out_len - 1) as f64
    }
}

fn bilinear(data: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let sample = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= width as isize || yi >= height as isize {
            0.0
        } else {
            data[yi as usize * width + xi as usize]
        }
    };
    let (x0, y0) = (x0 as isize, y0 as isize);
    let v00 = sample(x0, y0);
    let v10 = sample(x0 + 1, y0);
    let v01 = sample(x0, y0 + 1);
    let v11 = sample(x0 + 1, y0 + 1);
    v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
}

/// Pixel-wise sum clamped to [0, 1]; the result carries the `Fused` kind
/// and the left image's label and provenance.
pub fn fuse_images(
    a: &SpectrogramImage,
    b: &SpectrogramImage,
) -> Result<SpectrogramImage, SignatureError> {
    if a.width != b.width || a.height != b.height {
        return Err(SignatureError::DimensionMismatch {
            a_w: a.width,
            a_h: a.height,
            b_w: b.width,
            b_h: b.height,
        });
    }
    let pixels = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| (x + y).clamp(0.0, 1.0))
        .collect();
    Ok(SpectrogramImage {
        width: a.width,
        height: a.height,
        pixels,
        kind: TransformKind::Fused,
        label: a.label.clone(),
        provenance: a.provenance.clone(),
        augmented: a.augmented || b.augmented,
        id: a.id,
        ancestor: a.ancestor,
    })
}

/// Writes the image as an 8-bit grayscale PNG (intensity = round(p * 255)).
pub fn save_png(img: &SpectrogramImage, path: &Path) -> Result<(), SignatureError> {
    let mut gray = GrayImage::new(img.width as u32, img.height as u32);
    for y in 0..img.height {
        for x in 0..img.width {
            let v = (img.at(x, y).clamp(0.0, 1.0) * 255.0).round() as u8;
            gray.put_pixel(x as u32, y as u32, Luma([v]));
        }
    }
    gray.save(path).map_err(|e| SignatureError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads an 8-bit grayscale PNG back into [0, 1] intensities.
pub fn load_png(path: &Path) -> Result<(usize, usize, Vec<f64>), SignatureError> {
    let img = ImageReader::open(path)
        .map_err(|e| SignatureError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .decode()
        .map_err(|e| SignatureError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
    Ok((w, h, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_from(pixels: Vec<f64>, w: usize, h: usize) -> SpectrogramImage {
        SpectrogramImage {
            width: w,
            height: h,
            pixels,
            kind: TransformKind::Wavelet,
            label: "x".into(),
            provenance: Provenance::default(),
            augmented: false,
            id: 0,
            ancestor: 0,
        }
    }

    #[test]
    fn min_max_normalization_by_hand() {
        let m = Matrix {
            rows: 2,
            cols: 2,
            data: vec![0.0, 1.0, 2.0, 3.0],
        };
        // Identity-size render keeps the normalized values.
        let img = render_image(&m, 2, 2, TransformKind::Wavelet, "x", Provenance::default())
            .unwrap();
        let expected = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (p, e) in img.pixels.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_matrix_renders_to_half() {
        let m = Matrix {
            rows: 3,
            cols: 4,
            data: vec![7.0; 12],
        };
        let img = render_image(&m, 8, 5, TransformKind::Stft, "x", Provenance::default())
            .unwrap();
        assert!(img.pixels.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn output_dimensions_are_fixed() {
        for (rows, cols) in [(2, 2), (500, 300), (10, 90)] {
            let m = Matrix::zeros(rows, cols);
            let img = render_image(&m, 56, 34, TransformKind::Wavelet, "x", Provenance::default())
                .unwrap();
            assert_eq!((img.width, img.height), (56, 34));
            assert!(img.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn nan_matrix_is_rejected() {
        let m = Matrix {
            rows: 1,
            cols: 2,
            data: vec![0.0, f64::NAN],
        };
        assert!(matches!(
            render_image(&m, 2, 1, TransformKind::Wavelet, "x", Provenance::default()),
            Err(SignatureError::NonFiniteMatrix)
        ));
    }

    #[test]
    fn fusion_identity_commutativity_clamp() {
        let a = image_from(vec![0.2, 0.6, 0.9, 0.4], 2, 2);
        let zero = image_from(vec![0.0; 4], 2, 2);
        let fused = fuse_images(&a, &zero).unwrap();
        assert_eq!(fused.pixels, a.pixels);

        let b = image_from(vec![0.6; 4], 2, 2);
        let c = image_from(vec![0.6; 4], 2, 2);
        let clamped = fuse_images(&b, &c).unwrap();
        assert!(clamped.pixels.iter().all(|&p| p == 1.0));

        let ab = fuse_images(&a, &b).unwrap();
        let ba = fuse_images(&b, &a).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ab.pixels), bits(&ba.pixels));
        assert_eq!(ab.kind, TransformKind::Fused);
    }

    #[test]
    fn fusion_rejects_dimension_mismatch() {
        let a = image_from(vec![0.0; 4], 2, 2);
        let b = image_from(vec![0.0; 6], 3, 2);
        assert!(matches!(
            fuse_images(&a, &b),
            Err(SignatureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn png_round_trip_at_8_bits() {
        let img = image_from((0..56 * 34).map(|i| (i % 256) as f64 / 255.0).collect(), 56, 34);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.png");
        save_png(&img, &path).unwrap();
        let (w, h, pixels) = load_png(&path).unwrap();
        assert_eq!((w, h), (56, 34));
        for (a, b) in img.pixels.iter().zip(&pixels) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
