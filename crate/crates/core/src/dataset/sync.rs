//! Mains/appliance synchronization.
//!
//! The reference timestamps are the appliance timestamps (which must agree
//! across appliance channels). Mains readings whose stamps are not in the
//! reference set are discarded; reference stamps with no mains reading get a
//! literal 0 and are counted as gaps.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DataError, TimeSeries};

/// Aligned table of timestamps, mains 1, mains 2, and N appliance columns
/// (the paper's N+3-column house file).
#[derive(Debug, Clone, PartialEq)]
pub struct SyncedHouse {
    timestamps: Vec<i64>,
    mains1: Vec<f64>,
    mains2: Vec<f64>,
    appliance_names: Vec<String>,
    appliance_cols: Vec<Vec<f64>>,
    mains1_gaps: usize,
    mains2_gaps: usize,
}

impl SyncedHouse {
    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn mains1(&self) -> &[f64] {
        &self.mains1
    }

    pub fn mains2(&self) -> &[f64] {
        &self.mains2
    }

    pub fn appliance_names(&self) -> &[String] {
        &self.appliance_names
    }

    pub fn appliance(&self, name: &str) -> Option<&[f64]> {
        self.appliance_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.appliance_cols[i].as_slice())
    }

    pub fn appliance_columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.appliance_names
            .iter()
            .map(|n| n.as_str())
            .zip(self.appliance_cols.iter().map(|c| c.as_slice()))
    }

    /// Rowwise mains1 + mains2.
    pub fn aggregate(&self) -> Vec<f64> {
        self.mains1
            .iter()
            .zip(&self.mains2)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    /// Timestamp column + two mains columns + N appliance columns.
    pub fn column_count(&self) -> usize {
        3 + self.appliance_cols.len()
    }

    /// Reference stamps that had no mains reading (per mains channel).
    pub fn mains_gaps(&self) -> (usize, usize) {
        (self.mains1_gaps, self.mains2_gaps)
    }

    pub(crate) fn from_columns(
        timestamps: Vec<i64>,
        mains1: Vec<f64>,
        mains2: Vec<f64>,
        appliance_names: Vec<String>,
        appliance_cols: Vec<Vec<f64>>,
        mains1_gaps: usize,
        mains2_gaps: usize,
    ) -> Self {
        Self {
            timestamps,
            mains1,
            mains2,
            appliance_names,
            appliance_cols,
            mains1_gaps,
            mains2_gaps,
        }
    }
}

/// Aligns mains channels against the appliance reference timestamps.
pub fn synchronize_house(
    mains1: &TimeSeries,
    mains2: &TimeSeries,
    appliances: &[(String, &TimeSeries)],
) -> Result<SyncedHouse, DataError> {
    if appliances.is_empty() {
        return Err(DataError::NoAppliances);
    }
    let (first_name, first) = (&appliances[0].0, appliances[0].1);
    for (name, series) in &appliances[1..] {
        if series.timestamps() != first.timestamps() {
            let row = first
                .timestamps()
                .iter()
                .zip(series.timestamps())
                .position(|(a, b)| a != b)
                .unwrap_or_else(|| first.len().min(series.len()));
            let a = first.timestamps().get(row).copied().unwrap_or(i64::MIN);
            let b = series.timestamps().get(row).copied().unwrap_or(i64::MIN);
            return Err(DataError::UnalignedAppliances {
                first: first_name.clone(),
                second: name.clone(),
                row,
                a,
                b,
            });
        }
    }

    let reference = first.timestamps().to_vec();
    let (m1, gaps1) = align_mains(&reference, mains1);
    let (m2, gaps2) = align_mains(&reference, mains2);
    let names = appliances.iter().map(|(n, _)| n.clone()).collect();
    let cols = appliances
        .iter()
        .map(|(_, s)| s.values().to_vec())
        .collect();
    Ok(SyncedHouse::from_columns(
        reference, m1, m2, names, cols, gaps1, gaps2,
    ))
}

/// Merge-walk over two sorted stamp sequences. Mains stamps not present in
/// the reference are dropped; missing positions become 0.
fn align_mains(reference: &[i64], mains: &TimeSeries) -> (Vec<f64>, usize) {
    let mut out = vec![0.0; reference.len()];
    let mut gaps = 0;
    let stamps = mains.timestamps();
    let values = mains.values();
    let mut j = 0;
    for (i, &ts) in reference.iter().enumerate() {
        while j < stamps.len() && stamps[j] < ts {
            j += 1;
        }
        if j < stamps.len() && stamps[j] == ts {
            out[i] = values[j];
            j += 1;
        } else {
            gaps += 1;
        }
    }
    (out, gaps)
}

/// Writes the N+3-column house file: `timestamp,mains1,mains2,<appliances>`.
pub fn write_synced_csv(path: &Path, house: &SyncedHouse) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header = String::from("timestamp,mains1,mains2");
    for name in house.appliance_names() {
        header.push(',');
        header.push_str(name);
    }
    writeln!(w, "{header}").map_err(io_err)?;
    for i in 0..house.rows() {
        write!(
            w,
            "{},{:.6},{:.6}",
            house.timestamps[i], house.mains1[i], house.mains2[i]
        )
        .map_err(io_err)?;
        for col in &house.appliance_cols {
            write!(w, ",{:.6}", col[i]).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reads a file produced by [`write_synced_csv`]. Gap counts are not
/// recoverable from the file and read back as zero.
pub fn read_synced_csv(path: &Path) -> Result<SyncedHouse, DataError> {
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
        .ok_or_else(|| bad("empty file".into()))?
        .map_err(io_err)?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "timestamp" || cols[1] != "mains1" || cols[2] != "mains2" {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let appliance_names: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
    let n_apps = appliance_names.len();
    let mut timestamps = Vec::new();
    let mut mains1 = Vec::new();
    let mut mains2 = Vec::new();
    let mut appliance_cols = vec![Vec::new(); n_apps];
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 + n_apps {
            return Err(bad(format!("row {}: expected {} fields", i + 2, 3 + n_apps)));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("row {}: bad number {s:?}", i + 2)))
        };
        timestamps.push(
            fields[0]
                .parse::<i64>()
                .map_err(|_| bad(format!("row {}: bad timestamp", i + 2)))?,
        );
        mains1.push(parse_f(fields[1])?);
        mains2.push(parse_f(fields[2])?);
        for (col, f) in appliance_cols.iter_mut().zip(&fields[3..]) {
            col.push(parse_f(f)?);
        }
    }
    Ok(SyncedHouse::from_columns(
        timestamps,
        mains1,
        mains2,
        appliance_names,
        appliance_cols,
        0,
        0,
    ))
}
