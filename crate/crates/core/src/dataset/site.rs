//! Site-NILM four-class wattage labeling and the three-column site file.
//!
//! Classes partition the wattage axis with left-closed boundaries:
//! A = [0, 10), B = [10, 15), C = [15, 80), D = [80, inf).

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteClass {
    A,
    B,
    C,
    D,
}

impl SiteClass {
    pub const ALL: [SiteClass; 4] = [SiteClass::A, SiteClass::B, SiteClass::C, SiteClass::D];

    pub fn index(self) -> usize {
        match self {
            SiteClass::A => 0,
            SiteClass::B => 1,
            SiteClass::C => 2,
            SiteClass::D => 3,
        }
    }

    pub fn from_str_letter(s: &str) -> Option<Self> {
        match s.trim() {
            "A" | "a" => Some(SiteClass::A),
            "B" | "b" => Some(SiteClass::B),
            "C" | "c" => Some(SiteClass::C),
            "D" | "d" => Some(SiteClass::D),
            _ => None,
        }
    }
}

impl fmt::Display for SiteClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            SiteClass::A => 'A',
            SiteClass::B => 'B',
            SiteClass::C => 'C',
            SiteClass::D => 'D',
        };
        write!(f, "{c}")
    }
}

/// Labels one wattage value. Negative or non-finite watts are rejected.
pub fn label_site_class(watts: f64) -> Result<SiteClass, DataError> {
    if !watts.is_finite() || watts < 0.0 {
        return Err(DataError::NegativeWatts(watts));
    }
    Ok(if watts < 10.0 {
        SiteClass::A
    } else if watts < 15.0 {
        SiteClass::B
    } else if watts < 80.0 {
        SiteClass::C
    } else {
        SiteClass::D
    })
}

pub fn label_site_classes(watts: &[f64]) -> Result<Vec<SiteClass>, DataError> {
    watts.iter().map(|&w| label_site_class(w)).collect()
}

/// Aligned site columns: aggregate watts, appliance watts, class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteData {
    pub aggregate: Vec<f64>,
    pub appliance: Vec<f64>,
    pub classes: Vec<SiteClass>,
}

impl SiteData {
    pub fn len(&self) -> usize {
        self.aggregate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aggregate.is_empty()
    }

    /// Chronological split, train first.
    pub fn split(&self, ratio: f64) -> Result<(SiteData, SiteData), DataError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(DataError::BadSplitRatio(ratio));
        }
        let cut = (self.len() as f64 * ratio).floor() as usize;
        Ok((
            SiteData {
                aggregate: self.aggregate[..cut].to_vec(),
                appliance: self.appliance[..cut].to_vec(),
                classes: self.classes[..cut].to_vec(),
            },
            SiteData {
                aggregate: self.aggregate[cut..].to_vec(),
                appliance: self.appliance[cut..].to_vec(),
                classes: self.classes[cut..].to_vec(),
            },
        ))
    }
}

/// Builds site data from raw columns, labeling classes from the aggregate.
pub fn site_data_from_columns(
    aggregate: Vec<f64>,
    appliance: Vec<f64>,
) -> Result<SiteData, DataError> {
    let classes = label_site_classes(&aggregate)?;
    Ok(SiteData {
        aggregate,
        appliance,
        classes,
    })
}

/// Writes `aggregate,appliance,class` rows with 6-decimal wattages.
pub fn write_site_csv(path: &Path, data: &SiteData) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "aggregate,appliance,class").map_err(io_err)?;
    for i in 0..data.len() {
        writeln!(
            w,
            "{:.6},{:.6},{}",
            data.aggregate[i], data.appliance[i], data.classes[i]
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_site_csv(path: &Path) -> Result<SiteData, DataError> {
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
        .ok_or_else(|| bad("empty site file".into()))?
        .map_err(io_err)?;
    if header.trim() != "aggregate,appliance,class" {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut aggregate = Vec::new();
    let mut appliance = Vec::new();
    let mut classes = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(bad(format!("row {}: expected 3 fields", i + 2)));
        }
        let a = fields[0].parse::<f64>().map_err(|_| bad(format!("row {}: bad aggregate", i + 2)))?;
        let p = fields[1].parse::<f64>().map_err(|_| bad(format!("row {}: bad appliance", i + 2)))?;
        let c = SiteClass::from_str_letter(fields[2])
            .ok_or_else(|| bad(format!("row {}: bad class {:?}", i + 2, fields[2])))?;
        aggregate.push(a);
        appliance.push(p);
        classes.push(c);
    }
    Ok(SiteData {
        aggregate,
        appliance,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_examples() {
        assert_eq!(label_site_class(5.0).unwrap(), SiteClass::A);
        assert_eq!(label_site_class(50.0).unwrap(), SiteClass::C);
        // Boundary values fall into the higher band (left-closed).
        assert_eq!(label_site_class(10.0).unwrap(), SiteClass::B);
        assert_eq!(label_site_class(15.0).unwrap(), SiteClass::C);
        assert_eq!(label_site_class(80.0).unwrap(), SiteClass::D);
    }

    #[test]
    fn negative_watts_rejected() {
        assert!(matches!(
            label_site_class(-0.1),
            Err(DataError::NegativeWatts(_))
        ));
        assert!(label_site_class(f64::NAN).is_err());
    }

    #[test]
    fn partition_has_no_gaps_or_overlaps() {
        // Dense scan of the axis: every value gets exactly one class and
        // classes are monotone in wattage.
        let mut prev = SiteClass::A;
        let mut x = 0.0;
        while x < 120.0 {
            let c = label_site_class(x).unwrap();
            assert!(c.index() >= prev.index());
            prev = c;
            x += 0.01;
        }
        assert_eq!(prev, SiteClass::D);
    }

    #[test]
    fn site_csv_round_trip() {
        let data = site_data_from_columns(vec![5.0, 12.0, 40.0, 120.0], vec![4.0, 10.0, 35.0, 110.0])
            .unwrap();
        assert_eq!(
            data.classes,
            vec![SiteClass::A, SiteClass::B, SiteClass::C, SiteClass::D]
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("site.csv");
        write_site_csv(&path, &data).unwrap();
        let loaded = read_site_csv(&path).unwrap();
        assert_eq!(loaded, data);
    }
}
