//! `report`: re-render CSV payloads as plot files (CSV + SVG).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use nilmkit_core::metrics::{
    write_confusion_csv, write_confusion_svg, write_histogram_csv, write_histogram_svg,
    write_overlay_csv, write_overlay_svg, ConfusionMatrix,
};

use super::{require_exists, Globals};
use crate::manifest::{config_repr, write_manifest};
use crate::ReportArgs;

pub fn run(globals: &Globals, args: ReportArgs) -> Result<()> {
    require_exists(&args.input, "payload csv")?;
    let outputs = match args.kind.to_ascii_lowercase().as_str() {
        "overlay" => overlay(globals, &args)?,
        "histogram" => histogram(globals, &args)?,
        "confusion" => confusion(globals, &args)?,
        other => bail!("unknown report kind {other:?} (use overlay|histogram|confusion)"),
    };
    let params = vec![
        ("stage", "report".to_string()),
        ("kind", args.kind.clone()),
        ("input", args.input.display().to_string()),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "report",
        globals.seed,
        &config_repr(&params),
        &outputs,
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn read_rows(path: &std::path::Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().context("empty payload")??;
    let columns: Vec<String> = header.trim().split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(line.trim().split(',').map(str::to_string).collect());
    }
    Ok((columns, rows))
}

fn column_f64(columns: &[String], rows: &[Vec<String>], name: &str) -> Result<Vec<f64>> {
    let idx = columns
        .iter()
        .position(|c| c == name)
        .with_context(|| format!("payload lacks a {name:?} column"))?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.get(idx)
                .and_then(|v| v.parse::<f64>().ok())
                .with_context(|| format!("row {}: bad {name} value", i + 2))
        })
        .collect()
}

fn overlay(globals: &Globals, args: &ReportArgs) -> Result<Vec<PathBuf>> {
    let (columns, rows) = read_rows(&args.input)?;
    let gt = column_f64(&columns, &rows, "gt")?;
    let pd = column_f64(&columns, &rows, "pd")?;
    let csv = globals.out_dir.join("report-overlay.csv");
    let svg = globals.out_dir.join("report-overlay.svg");
    write_overlay_csv(&csv, &gt, &pd)?;
    write_overlay_svg(&svg, &gt, &pd)?;
    println!("overlay: {} points", gt.len());
    Ok(vec![csv, svg])
}

fn histogram(globals: &Globals, args: &ReportArgs) -> Result<Vec<PathBuf>> {
    let (columns, rows) = read_rows(&args.input)?;
    if columns != ["label", "count"] {
        bail!("histogram payload must have label,count columns");
    }
    let labels: Vec<String> = rows.iter().map(|r| r[0].clone()).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let counts = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r[1].parse::<u64>()
                .with_context(|| format!("row {}: bad count", i + 2))
        })
        .collect::<Result<Vec<u64>>>()?;
    let csv = globals.out_dir.join("report-histogram.csv");
    let svg = globals.out_dir.join("report-histogram.svg");
    write_histogram_csv(&csv, &label_refs, &counts)?;
    write_histogram_svg(&svg, &label_refs, &counts)?;
    println!("histogram: {} bars", labels.len());
    Ok(vec![csv, svg])
}

fn confusion(globals: &Globals, args: &ReportArgs) -> Result<Vec<PathBuf>> {
    let (columns, rows) = read_rows(&args.input)?;
    if columns.first().map(String::as_str) != Some("truth\\pred") {
        bail!("confusion payload must start with a truth\\pred header");
    }
    let labels: Vec<String> = columns[1..].to_vec();
    let k = labels.len();
    if rows.len() != k {
        bail!("confusion payload must be square ({k} columns, {} rows)", rows.len());
    }
    let mut matrix = ConfusionMatrix::new(k);
    for (t, row) in rows.iter().enumerate() {
        if row.len() != k + 1 {
            bail!("confusion row {} has {} fields, expected {}", t + 2, row.len(), k + 1);
        }
        for (p, v) in row[1..].iter().enumerate() {
            let count: u64 = v
                .parse()
                .with_context(|| format!("confusion row {}: bad count {v:?}", t + 2))?;
            for _ in 0..count {
                matrix.record(t, p)?;
            }
        }
    }
    let csv = globals.out_dir.join("report-confusion.csv");
    let svg = globals.out_dir.join("report-confusion.svg");
    write_confusion_csv(&csv, &matrix, &labels)?;
    write_confusion_svg(&svg, &matrix, &labels)?;
    println!("confusion: {k} classes, {} samples", matrix.total());
    Ok(vec![csv, svg])
}
