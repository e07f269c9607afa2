//! Two-column training files: aggregate signal paired with one appliance.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::sync::SyncedHouse;
use super::DataError;

/// In-memory form of an appliance pair file. The aggregate column is
/// mains1 + mains2 rowwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    pub aggregate: Vec<f64>,
    pub appliance: Vec<f64>,
}

impl PairData {
    pub fn len(&self) -> usize {
        self.aggregate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aggregate.is_empty()
    }
}

/// Builds the train/test pair for one appliance with a chronological split:
/// the first `floor(n * split_ratio)` rows are the training file.
pub fn build_appliance_pair(
    synced: &SyncedHouse,
    appliance: &str,
    split_ratio: f64,
) -> Result<(PairData, PairData), DataError> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(DataError::BadSplitRatio(split_ratio));
    }
    let column = synced
        .appliance(appliance)
        .ok_or_else(|| DataError::UnknownAppliance(appliance.to_string()))?;
    let aggregate = synced.aggregate();
    let cut = (aggregate.len() as f64 * split_ratio).floor() as usize;
    let train = PairData {
        aggregate: aggregate[..cut].to_vec(),
        appliance: column[..cut].to_vec(),
    };
    let test = PairData {
        aggregate: aggregate[cut..].to_vec(),
        appliance: column[cut..].to_vec(),
    };
    Ok((train, test))
}

/// Writes `aggregate,appliance` rows with fixed 6-decimal formatting.
pub fn write_pair_csv(path: &Path, pair: &PairData) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "aggregate,appliance").map_err(io_err)?;
    for (a, b) in pair.aggregate.iter().zip(&pair.appliance) {
        writeln!(w, "{a:.6},{b:.6}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_pair_csv(path: &Path) -> Result<PairData, DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bad = |message: String| DataError::BadFormat {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = BufReader::new(File::open(path).map_err(io_err)?).lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty pair file".into()))?
        .map_err(io_err)?;
    if header.trim() != "aggregate,appliance" {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut aggregate = Vec::new();
    let mut appliance = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.trim().split(',');
        let a = parts.next().and_then(|s| s.parse::<f64>().ok());
        let b = parts.next().and_then(|s| s.parse::<f64>().ok());
        match (a, b) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => {
                aggregate.push(a);
                appliance.push(b);
            }
            _ => return Err(bad(format!("row {}: bad pair line", i + 2))),
        }
    }
    Ok(PairData {
        aggregate,
        appliance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::sync::synchronize_house;
    use crate::dataset::TimeSeries;

    fn house() -> SyncedHouse {
        let mains1 = TimeSeries::new(vec![0, 1], vec![10.0, 20.0]).unwrap();
        let mains2 = TimeSeries::new(vec![0, 1], vec![5.0, 5.0]).unwrap();
        let fridge = TimeSeries::new(vec![0, 1], vec![8.0, 9.0]).unwrap();
        let apps = vec![("fridge".to_string(), &fridge)];
        synchronize_house(&mains1, &mains2, &apps).unwrap()
    }

    #[test]
    fn aggregate_is_sum_of_mains() {
        let (train, test) = build_appliance_pair(&house(), "fridge", 0.5).unwrap();
        assert_eq!(train.aggregate, vec![15.0]);
        assert_eq!(train.appliance, vec![8.0]);
        assert_eq!(test.aggregate, vec![25.0]);
        assert_eq!(test.appliance, vec![9.0]);
    }

    #[test]
    fn split_is_chronological_with_floor() {
        let mains1 = TimeSeries::new((0..100).collect(), vec![1.0; 100]).unwrap();
        let mains2 = TimeSeries::new((0..100).collect(), vec![0.0; 100]).unwrap();
        let app = TimeSeries::new((0..100).collect(), (0..100).map(|i| i as f64).collect()).unwrap();
        let apps = vec![("a".to_string(), &app)];
        let synced = synchronize_house(&mains1, &mains2, &apps).unwrap();
        let (train, test) = build_appliance_pair(&synced, "a", 0.8).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        assert_eq!(train.appliance[79], 79.0);
        assert_eq!(test.appliance[0], 80.0);
    }

    #[test]
    fn unknown_appliance_is_an_error() {
        assert!(matches!(
            build_appliance_pair(&house(), "toaster", 0.5),
            Err(DataError::UnknownAppliance(name)) if name == "toaster"
        ));
    }

    #[test]
    fn csv_round_trip_at_six_decimals() {
        let pair = PairData {
            aggregate: vec![15.1234565, 25.0],
            appliance: vec![8.0, 9.5],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.csv");
        write_pair_csv(&path, &pair).unwrap();
        let loaded = read_pair_csv(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert!((loaded.aggregate[0] - pair.aggregate[0]).abs() < 1e-6);
        assert_eq!(loaded.appliance[1], 9.5);
    }
}
