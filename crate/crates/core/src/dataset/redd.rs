//! REDD low-frequency layout: one whitespace-separated "timestamp value"
//! file per channel plus a labels file of "channel name" lines.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::sync::{synchronize_house, SyncedHouse};
use super::{DataError, ParseReport, TimeSeries};

/// Raw parse result: every labeled channel with its readings.
#[derive(Debug, Clone)]
pub struct ReddHouse {
    /// Channel id -> appliance name, in channel order.
    pub labels: BTreeMap<u32, String>,
    pub channels: BTreeMap<u32, TimeSeries>,
    pub report: ParseReport,
}

/// Parses a REDD house directory (`labels.dat` plus `channel_<k>.dat`).
pub fn parse_redd_house(dir: &Path) -> Result<ReddHouse, DataError> {
    let labels_path = dir.join("labels.dat");
    if !labels_path.exists() {
        return Err(DataError::MissingLabels(labels_path));
    }
    let mut report = ParseReport::default();
    let labels = parse_labels(&labels_path, &mut report)?;

    let mut channels = BTreeMap::new();
    for (&channel, name) in &labels {
        let path = dir.join(format!("channel_{channel}.dat"));
        let series = parse_channel_file(&path, &mut report)?;
        if series.is_empty() {
            report
                .warnings
                .push(format!("channel {channel} ({name}): empty file"));
        }
        channels.insert(channel, series);
    }
    Ok(ReddHouse {
        labels,
        channels,
        report,
    })
}

fn parse_labels(path: &Path, report: &mut ParseReport) -> Result<BTreeMap<u32, String>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut labels = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        report.lines_total += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.splitn(2, char::is_whitespace);
        let channel = parts.next().and_then(|s| s.parse::<u32>().ok());
        let name = parts.next().map(|s| s.trim().to_string());
        match (channel, name) {
            (Some(c), Some(n)) if !n.is_empty() => {
                labels.insert(c, n);
            }
            _ => {
                report.lines_skipped += 1;
                report
                    .warnings
                    .push(format!("{}:{}: malformed labels line", path.display(), i + 1));
            }
        }
    }
    Ok(labels)
}

fn parse_channel_file(path: &Path, report: &mut ParseReport) -> Result<TimeSeries, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        report.lines_total += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let ts = parts.next().and_then(parse_timestamp);
        let value = parts.next().and_then(|s| s.parse::<f64>().ok());
        match (ts, value) {
            (Some(ts), Some(v)) if v.is_finite() => {
                if let Some(&prev) = timestamps.last() {
                    if ts <= prev {
                        return Err(DataError::NonMonotonicTimestamp {
                            path: path.to_path_buf(),
                            line: i + 1,
                            prev,
                            got: ts,
                        });
                    }
                }
                timestamps.push(ts);
                values.push(v);
            }
            _ => {
                report.lines_skipped += 1;
            }
        }
    }
    TimeSeries::new(timestamps, values)
}

/// Timestamps are matched on whole seconds; fractional stamps are floored.
fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    s.parse::<f64>().ok().map(|v| v.floor() as i64)
}

/// Splits a parsed house into mains 1/2 and appliance channels (by the
/// "mains" label) and synchronizes them. Duplicate appliance names are
/// disambiguated with a `_ch<N>` suffix so each column stays addressable.
pub fn redd_to_synced(house: &ReddHouse) -> Result<(SyncedHouse, Vec<String>), DataError> {
    let mut warnings = Vec::new();
    let mut mains = Vec::new();
    let mut appliances: Vec<(String, &TimeSeries)> = Vec::new();
    let mut name_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for name in house.labels.values() {
        if name != "mains" {
            *name_counts.entry(name.as_str()).or_default() += 1;
        }
    }
    for (&channel, name) in &house.labels {
        let series = house
            .channels
            .get(&channel)
            .expect("parse fills every labeled channel");
        if name == "mains" {
            mains.push(series);
        } else {
            let column_name = if name_counts[name.as_str()] > 1 {
                format!("{name}_ch{channel}")
            } else {
                name.clone()
            };
            appliances.push((column_name, series));
        }
    }
    let mains1 = match mains.first() {
        Some(m) => (*m).clone(),
        None => {
            warnings.push("no mains channel labeled; mains1 column is all zeros".into());
            TimeSeries::empty()
        }
    };
    let mains2 = match mains.get(1) {
        Some(m) => (*m).clone(),
        None => {
            warnings.push("single mains channel; mains2 column is all zeros".into());
            TimeSeries::empty()
        }
    };
    let synced = synchronize_house(&mains1, &mains2, &appliances)?;
    Ok((synced, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_house(dir: &Path, labels: &str, files: &[(&str, &str)]) {
        fs::write(dir.join("labels.dat"), labels).unwrap();
        for (name, content) in files {
            fs::write(dir.join(name), content).unwrap();
        }
    }

    #[test]
    fn parses_documented_line_format() {
        let dir = tempfile::tempdir().unwrap();
        write_house(
            dir.path(),
            "1 mains\n2 mains\n5 refrigerator\n",
            &[
                ("channel_1.dat", "1303132964 245.0\n1303132967 250.25\n"),
                ("channel_2.dat", "1303132964 100.0\n"),
                ("channel_5.dat", "1303132964 6.0\n1303132965 6.5\n"),
            ],
        );
        let house = parse_redd_house(dir.path()).unwrap();
        assert_eq!(house.labels[&5], "refrigerator");
        let ch1 = &house.channels[&1];
        assert_eq!(ch1.timestamps()[0], 1303132964);
        assert_eq!(ch1.values()[0], 245.0);
        assert_eq!(house.report.lines_skipped, 0);
    }

    #[test]
    fn missing_labels_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_redd_house(dir.path()),
            Err(DataError::MissingLabels(_))
        ));
    }

    #[test]
    fn malformed_lines_are_counted_not_dropped_silently() {
        let dir = tempfile::tempdir().unwrap();
        write_house(
            dir.path(),
            "1 mains\n",
            &[("channel_1.dat", "100 1.0\nnot-a-line\n200 2.0\n300 abc\n")],
        );
        let house = parse_redd_house(dir.path()).unwrap();
        assert_eq!(house.channels[&1].len(), 2);
        assert_eq!(house.report.lines_skipped, 2);
    }

    #[test]
    fn non_monotonic_timestamps_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        write_house(
            dir.path(),
            "1 mains\n",
            &[("channel_1.dat", "100 1.0\n200 2.0\n150 3.0\n")],
        );
        match parse_redd_house(dir.path()) {
            Err(DataError::NonMonotonicTimestamp { line, prev, got, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(prev, 200);
                assert_eq!(got, 150);
            }
            other => panic!("expected monotonicity error, got {other:?}"),
        }
    }

    #[test]
    fn empty_channel_file_warns() {
        let dir = tempfile::tempdir().unwrap();
        write_house(
            dir.path(),
            "1 mains\n2 oven\n",
            &[("channel_1.dat", "100 1.0\n"), ("channel_2.dat", "")],
        );
        let house = parse_redd_house(dir.path()).unwrap();
        assert!(house.channels[&2].is_empty());
        assert!(house.report.warnings.iter().any(|w| w.contains("empty file")));
    }

    #[test]
    fn duplicate_appliance_names_get_channel_suffix() {
        let dir = tempfile::tempdir().unwrap();
        write_house(
            dir.path(),
            "1 mains\n3 kitchen_outlets\n4 kitchen_outlets\n",
            &[
                ("channel_1.dat", "100 50.0\n"),
                ("channel_3.dat", "100 1.0\n101 2.0\n"),
                ("channel_4.dat", "100 3.0\n101 4.0\n"),
            ],
        );
        let house = parse_redd_house(dir.path()).unwrap();
        let (synced, _) = redd_to_synced(&house).unwrap();
        assert_eq!(
            synced.appliance_names(),
            &["kitchen_outlets_ch3", "kitchen_outlets_ch4"]
        );
    }
}
