//! Plot-ready outputs: CSV series plus small static SVG charts with
//! deterministic bytes (fixed field ordering, 6-decimal formatting, no
//! timestamps).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ConfusionMatrix, MetricsError};

fn writer(path: &Path) -> Result<BufWriter<File>, MetricsError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> MetricsError + '_ {
    move |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `index,gt,pd` rows for a ground-truth/prediction overlay.
pub fn write_overlay_csv(path: &Path, gt: &[f64], pd: &[f64]) -> Result<(), MetricsError> {
    if gt.is_empty() || gt.len() != pd.len() {
        return Err(MetricsError::EmptyPayload("overlay"));
    }
    let mut w = writer(path)?;
    let e = io_err(path);
    writeln!(w, "index,gt,pd").map_err(&e)?;
    for (i, (g, p)) in gt.iter().zip(pd).enumerate() {
        writeln!(w, "{i},{g:.6},{p:.6}").map_err(&e)?;
    }
    w.flush().map_err(&e)
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 320.0;
const MARGIN: f64 = 40.0;

fn svg_header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n\
         <rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n"
    )
}

fn polyline(points: &[(f64, f64)], color: &str) -> String {
    let mut s = format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" points=\"");
    for (x, y) in points {
        s.push_str(&format!("{x:.2},{y:.2} "));
    }
    s.push_str("\"/>\n");
    s
}

/// Two-series line chart (GT black, PD red).
pub fn write_overlay_svg(path: &Path, gt: &[f64], pd: &[f64]) -> Result<(), MetricsError> {
    if gt.is_empty() || gt.len() != pd.len() {
        return Err(MetricsError::EmptyPayload("overlay"));
    }
    let lo = gt
        .iter()
        .chain(pd)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = gt
        .iter()
        .chain(pd)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = gt.len();
    let to_xy = |i: usize, v: f64| {
        let x = MARGIN + (SVG_W - 2.0 * MARGIN) * i as f64 / (n.max(2) - 1) as f64;
        let y = SVG_H - MARGIN - (SVG_H - 2.0 * MARGIN) * (v - lo) / span;
        (x, y)
    };
    let gt_pts: Vec<_> = gt.iter().enumerate().map(|(i, &v)| to_xy(i, v)).collect();
    let pd_pts: Vec<_> = pd.iter().enumerate().map(|(i, &v)| to_xy(i, v)).collect();
    let mut svg = svg_header();
    svg.push_str(&polyline(&gt_pts, "black"));
    svg.push_str(&polyline(&pd_pts, "red"));
    svg.push_str("</svg>\n");
    let mut w = writer(path)?;
    w.write_all(svg.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// `label,count` rows.
pub fn write_histogram_csv(
    path: &Path,
    labels: &[&str],
    counts: &[u64],
) -> Result<(), MetricsError> {
    if labels.is_empty() || labels.len() != counts.len() {
        return Err(MetricsError::EmptyPayload("histogram"));
    }
    let mut w = writer(path)?;
    let e = io_err(path);
    writeln!(w, "label,count").map_err(&e)?;
    for (label, count) in labels.iter().zip(counts) {
        writeln!(w, "{label},{count}").map_err(&e)?;
    }
    w.flush().map_err(&e)
}

/// Bar chart with one bar per label.
pub fn write_histogram_svg(
    path: &Path,
    labels: &[&str],
    counts: &[u64],
) -> Result<(), MetricsError> {
    if labels.is_empty() || labels.len() != counts.len() {
        return Err(MetricsError::EmptyPayload("histogram"));
    }
    let max = *counts.iter().max().unwrap() as f64;
    let max = if max > 0.0 { max } else { 1.0 };
    let n = labels.len() as f64;
    let band = (SVG_W - 2.0 * MARGIN) / n;
    let mut svg = svg_header();
    for (i, (&label, &count)) in labels.iter().zip(counts).enumerate() {
        let h = (SVG_H - 2.0 * MARGIN) * count as f64 / max;
        let x = MARGIN + band * i as f64 + band * 0.1;
        let y = SVG_H - MARGIN - h;
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"steelblue\"/>\n",
            band * 0.8
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{label}</text>\n",
            x + band * 0.4,
            SVG_H - MARGIN + 14.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{count}</text>\n",
            x + band * 0.4,
            y - 4.0
        ));
    }
    svg.push_str("</svg>\n");
    let mut w = writer(path)?;
    w.write_all(svg.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Matrix as CSV: header `truth\pred` then one row per true class.
pub fn write_confusion_csv(
    path: &Path,
    matrix: &ConfusionMatrix,
    labels: &[String],
) -> Result<(), MetricsError> {
    if matrix.classes() == 0 {
        return Err(MetricsError::EmptyPayload("confusion"));
    }
    let name = |i: usize| {
        labels
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("class{i}"))
    };
    let mut w = writer(path)?;
    let e = io_err(path);
    let header: Vec<String> = (0..matrix.classes()).map(name).collect();
    writeln!(w, "truth\\pred,{}", header.join(",")).map_err(&e)?;
    for t in 0..matrix.classes() {
        let row: Vec<String> = (0..matrix.classes())
            .map(|p| matrix.get(t, p).to_string())
            .collect();
        writeln!(w, "{},{}", name(t), row.join(",")).map_err(&e)?;
    }
    w.flush().map_err(&e)
}

/// Shaded grid: darker cells hold more counts.
pub fn write_confusion_svg(
    path: &Path,
    matrix: &ConfusionMatrix,
    labels: &[String],
) -> Result<(), MetricsError> {
    let k = matrix.classes();
    if k == 0 {
        return Err(MetricsError::EmptyPayload("confusion"));
    }
    let max = (0..k)
        .flat_map(|t| (0..k).map(move |p| (t, p)))
        .map(|(t, p)| matrix.get(t, p))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let cell = ((SVG_H - 2.0 * MARGIN) / k as f64).min((SVG_W - 2.0 * MARGIN) / k as f64);
    let mut svg = svg_header();
    for t in 0..k {
        for p in 0..k {
            let v = matrix.get(t, p) as f64;
            let shade = 255.0 - 205.0 * v / max;
            let x = MARGIN + p as f64 * cell;
            let y = MARGIN + t as f64 * cell;
            svg.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" \
                 fill=\"rgb({shade:.0},{shade:.0},255)\" stroke=\"gray\" stroke-width=\"0.5\"/>\n"
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 3.0,
                matrix.get(t, p)
            ));
        }
        let label = labels.get(t).cloned().unwrap_or_else(|| format!("c{t}"));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{label}</text>\n",
            MARGIN - 4.0,
            MARGIN + t as f64 * cell + cell / 2.0 + 3.0
        ));
    }
    svg.push_str("</svg>\n");
    let mut w = writer(path)?;
    w.write_all(svg.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn overlay_outputs_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let gt = [0.1, 0.5, 0.3];
        let pd = [0.12, 0.45, 0.33];
        let c1 = dir.path().join("a.csv");
        let c2 = dir.path().join("b.csv");
        write_overlay_csv(&c1, &gt, &pd).unwrap();
        write_overlay_csv(&c2, &gt, &pd).unwrap();
        assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());
        let s1 = dir.path().join("a.svg");
        let s2 = dir.path().join("b.svg");
        write_overlay_svg(&s1, &gt, &pd).unwrap();
        write_overlay_svg(&s2, &gt, &pd).unwrap();
        assert_eq!(fs::read(&s1).unwrap(), fs::read(&s2).unwrap());
        let text = fs::read_to_string(&c1).unwrap();
        assert!(text.starts_with("index,gt,pd\n0,0.100000,0.120000\n"));
    }

    #[test]
    fn histogram_has_five_bars_for_five_states() {
        let dir = tempfile::tempdir().unwrap();
        let labels = ["stable", "minor+", "minor-", "large+", "large-"];
        let counts = [10, 2, 3, 1, 0];
        let svg_path = dir.path().join("h.svg");
        write_histogram_svg(&svg_path, &labels, &counts).unwrap();
        let svg = fs::read_to_string(&svg_path).unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 5);
        let csv_path = dir.path().join("h.csv");
        write_histogram_csv(&csv_path, &labels, &counts).unwrap();
        let csv = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn empty_payload_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_overlay_csv(&dir.path().join("x.csv"), &[], &[]),
            Err(MetricsError::EmptyPayload(_))
        ));
    }

    #[test]
    fn confusion_grid_contains_every_cell() {
        let dir = tempfile::tempdir().unwrap();
        let m = ConfusionMatrix::from_pairs(&[(0, 0), (0, 1), (1, 1)], 2).unwrap();
        let path = dir.path().join("c.svg");
        write_confusion_svg(&path, &m, &["a".into(), "b".into()]).unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 4);
        let csv_path = dir.path().join("c.csv");
        write_confusion_csv(&csv_path, &m, &["a".into(), "b".into()]).unwrap();
        let csv = fs::read_to_string(&csv_path).unwrap();
        assert!(csv.contains("truth\\pred,a,b"));
        assert!(csv.contains("a,1,1"));
        assert!(csv.contains("b,0,1"));
    }
}
