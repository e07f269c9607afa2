//! REFIT CSV layout: header row naming Time, Unix, Aggregate, and the
//! appliance columns; readings every ~8 seconds.

use std::fs::File;
use std::path::Path;

use super::{DataError, ParseReport, TimeSeries};

#[derive(Debug, Clone)]
pub struct RefitHouse {
    pub aggregate: TimeSeries,
    pub appliances: Vec<(String, TimeSeries)>,
    pub report: ParseReport,
}

impl RefitHouse {
    pub fn appliance(&self, name: &str) -> Option<&TimeSeries> {
        self.appliances
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, s)| s)
    }
}

/// Parses a REFIT house CSV, mapping columns by header name. Unparseable and
/// out-of-order rows are skipped and counted; a median inter-row spacing far
/// from the documented 8 s produces a warning.
pub fn parse_refit_house(path: &Path) -> Result<RefitHouse, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| DataError::BadFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    };
    let unix_idx = find("unix").ok_or_else(|| DataError::MissingColumn {
        path: path.to_path_buf(),
        column: "Unix".into(),
    })?;
    let agg_idx = find("aggregate").ok_or_else(|| DataError::MissingColumn {
        path: path.to_path_buf(),
        column: "Aggregate".into(),
    })?;
    let appliance_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| {
            *i != unix_idx
                && *i != agg_idx
                && !h.trim().eq_ignore_ascii_case("time")
                && !h.trim().is_empty()
        })
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();

    let mut report = ParseReport::default();
    let mut stamps: Vec<i64> = Vec::new();
    let mut agg: Vec<f64> = Vec::new();
    let mut app_values: Vec<Vec<f64>> = vec![Vec::new(); appliance_cols.len()];
    for record in reader.records() {
        report.lines_total += 1;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                report.lines_skipped += 1;
                continue;
            }
        };
        let parsed = parse_row(&record, unix_idx, agg_idx, &appliance_cols);
        match parsed {
            Some((ts, a, apps)) => {
                if let Some(&prev) = stamps.last() {
                    if ts <= prev {
                        report.lines_skipped += 1;
                        report.warnings.push(format!(
                            "{}: row with timestamp {ts} not after {prev}, skipped",
                            path.display()
                        ));
                        continue;
                    }
                }
                stamps.push(ts);
                agg.push(a);
                for (col, v) in app_values.iter_mut().zip(apps) {
                    col.push(v);
                }
            }
            None => {
                report.lines_skipped += 1;
            }
        }
    }

    if stamps.len() >= 2 {
        let mut diffs: Vec<i64> = stamps.windows(2).map(|w| w[1] - w[0]).collect();
        diffs.sort_unstable();
        let median = diffs[diffs.len() / 2];
        if !(7..=9).contains(&median) {
            report.warnings.push(format!(
                "{}: median inter-row spacing {median} s (documented ~8 s)",
                path.display()
            ));
        }
    }

    let aggregate = TimeSeries::new(stamps.clone(), agg)?;
    let appliances = appliance_cols
        .into_iter()
        .zip(app_values)
        .map(|((_, name), values)| {
            TimeSeries::new(stamps.clone(), values).map(|s| (name, s))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RefitHouse {
        aggregate,
        appliances,
        report,
    })
}

fn parse_row(
    record: &csv::StringRecord,
    unix_idx: usize,
    agg_idx: usize,
    appliance_cols: &[(usize, String)],
) -> Option<(i64, f64, Vec<f64>)> {
    let ts = record.get(unix_idx)?.trim().parse::<i64>().ok()?;
    let agg = record.get(agg_idx)?.trim().parse::<f64>().ok()?;
    if !agg.is_finite() {
        return None;
    }
    let mut apps = Vec::with_capacity(appliance_cols.len());
    for (idx, _) in appliance_cols {
        let v = record.get(*idx)?.trim().parse::<f64>().ok()?;
        if !v.is_finite() {
            return None;
        }
        apps.push(v);
    }
    Some((ts, agg, apps))
}
