//! Threshold-based disaggregation accuracy and four-class site evaluation.

use super::NilmError;
use crate::dataset::{label_site_class, NormStats, SiteClass};
use crate::nn::Network;
use crate::windowing::WindowBatch;

/// Per-appliance evaluation: D = |PD - GT| counted correct when D < tau.
/// PD/GT are retained for plotting.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub appliance: Option<String>,
    pub tau: f64,
    pub total: usize,
    pub correct: usize,
    pub predictions: Vec<f64>,
    pub ground_truth: Vec<f64>,
}

impl EvalReport {
    pub fn accuracy_pct(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 * 100.0 / self.total as f64
        }
    }
}

/// Counts points with |PD - GT| < tau.
pub fn threshold_accuracy(
    predictions: &[f64],
    ground_truth: &[f64],
    tau: f64,
) -> Result<EvalReport, NilmError> {
    if predictions.len() != ground_truth.len() {
        return Err(NilmError::LengthMismatch {
            pd: predictions.len(),
            gt: ground_truth.len(),
        });
    }
    if !(tau > 0.0) {
        return Err(NilmError::BadThreshold(tau));
    }
    let correct = predictions
        .iter()
        .zip(ground_truth)
        .filter(|(p, g)| (*p - *g).abs() < tau)
        .count();
    Ok(EvalReport {
        appliance: None,
        tau,
        total: predictions.len(),
        correct,
        predictions: predictions.to_vec(),
        ground_truth: ground_truth.to_vec(),
    })
}

/// Published per-appliance thresholds (normalized units). Names are matched
/// case-insensitively with spaces, hyphens, and underscores ignored.
pub fn tau_for_appliance(name: &str) -> Option<f64> {
    let key: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    match key.as_str() {
        "dishwasher" => Some(0.05),
        "microwave" => Some(0.055),
        "refrigerator" | "fridge" => Some(0.4),
        "washerdryer" => Some(0.025),
        _ => None,
    }
}

/// Runs the network over all windows and returns flattened (PD, GT) arrays
/// covering every target slot.
pub fn predict_windows(
    network: &Network,
    windows: &WindowBatch,
) -> Result<(Vec<f64>, Vec<f64>), NilmError> {
    if windows.rows() == 0 {
        return Err(NilmError::Empty);
    }
    const CHUNK: usize = 128;
    let mut pd = Vec::with_capacity(windows.rows() * 3);
    let mut gt = Vec::with_capacity(windows.rows() * 3);
    let mut row = 0;
    while row < windows.rows() {
        let end = (row + CHUNK).min(windows.rows());
        let x = windows.input_tensor(row..end);
        let y = windows.target_tensor(row..end);
        let out = network.forward(&x)?;
        pd.extend_from_slice(out.data());
        gt.extend_from_slice(y.data());
        row = end;
    }
    Ok((pd, gt))
}

/// Four-class confusion counts over {A, B, C, D}; rows are ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteEvalReport {
    pub confusion: [[u64; 4]; 4],
    pub total: u64,
}

impl SiteEvalReport {
    pub fn correct(&self) -> u64 {
        (0..4).map(|i| self.confusion[i][i]).sum()
    }

    pub fn accuracy_pct(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct() as f64 * 100.0 / self.total as f64
        }
    }
}

/// Site evaluation: the mid-point output slot is denormalized with the
/// appliance training stats (X_o = X_n * sigma + mu), clamped at 0 watts,
/// classified by the wattage thresholds, and compared against the
/// ground-truth class of the window's mid position.
pub fn site_evaluate(
    network: &Network,
    windows: &WindowBatch,
    stats: &NormStats,
    ground_truth: &[SiteClass],
) -> Result<SiteEvalReport, NilmError> {
    if windows.rows() != ground_truth.len() {
        return Err(NilmError::LabelMismatch {
            windows: windows.rows(),
            labels: ground_truth.len(),
        });
    }
    if windows.rows() == 0 {
        return Err(NilmError::Empty);
    }
    const CHUNK: usize = 128;
    let mut confusion = [[0u64; 4]; 4];
    let mut row = 0;
    while row < windows.rows() {
        let end = (row + CHUNK).min(windows.rows());
        let x = windows.input_tensor(row..end);
        let out = network.forward(&x)?;
        for (i, gt) in ground_truth[row..end].iter().enumerate() {
            let mid_normalized = out.data()[i * 3 + 1];
            let watts = (mid_normalized * stats.sigma + stats.mu).max(0.0);
            let predicted = label_site_class(watts).expect("clamped to >= 0");
            confusion[gt.index()][predicted.index()] += 1;
        }
        row = end;
    }
    Ok(SiteEvalReport {
        confusion,
        total: windows.rows() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_rule_by_hand() {
        let report = threshold_accuracy(&[0.10, 0.20], &[0.12, 0.50], 0.05).unwrap();
        assert_eq!(report.correct, 1);
        assert_eq!(report.total, 2);
        assert_eq!(report.accuracy_pct(), 50.0);
    }

    #[test]
    fn perfect_predictions_are_all_correct() {
        let v = vec![0.3, -0.4, 1.0];
        let report = threshold_accuracy(&v, &v, 1e-9).unwrap();
        assert_eq!(report.accuracy_pct(), 100.0);
    }

    #[test]
    fn accuracy_is_monotone_in_tau() {
        let pd = [0.0, 0.1, 0.2, 0.3, 0.45];
        let gt = [0.0; 5];
        let mut last = 0.0;
        for tau in [0.05, 0.15, 0.25, 0.35, 0.5] {
            let acc = threshold_accuracy(&pd, &gt, tau).unwrap().accuracy_pct();
            assert!(acc >= last);
            last = acc;
        }
        assert_eq!(last, 100.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(matches!(
            threshold_accuracy(&[0.0], &[0.0, 1.0], 0.1),
            Err(NilmError::LengthMismatch { .. })
        ));
        assert!(matches!(
            threshold_accuracy(&[0.0], &[0.0], 0.0),
            Err(NilmError::BadThreshold(_))
        ));
    }

    #[test]
    fn table_thresholds_by_name() {
        assert_eq!(tau_for_appliance("dishwasher"), Some(0.05));
        assert_eq!(tau_for_appliance("Dish Washer"), Some(0.05));
        assert_eq!(tau_for_appliance("microwave"), Some(0.055));
        assert_eq!(tau_for_appliance("refrigerator"), Some(0.4));
        assert_eq!(tau_for_appliance("washer_dryer"), Some(0.025));
        assert_eq!(tau_for_appliance("Washer-Dryer"), Some(0.025));
        assert_eq!(tau_for_appliance("toaster"), None);
    }

    #[test]
    fn denormalized_midpoint_drives_site_class() {
        // X_n = 0 with mu = 40, sigma = 10 must land in class C.
        let stats = NormStats { mu: 40.0, sigma: 10.0 };
        let watts = (0.0f64 * stats.sigma + stats.mu).max(0.0);
        assert_eq!(label_site_class(watts).unwrap(), SiteClass::C);
    }
}
