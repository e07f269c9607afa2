//! Loss functions with gradients w.r.t. predictions.

use super::NnError;
use crate::tensor::Tensor;

/// Floor applied inside `ln` so a zero probability cannot produce infinities.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

/// Evaluates the loss and its gradient w.r.t. `predictions`.
///
/// MSE is the mean of squared elementwise differences. Cross-entropy is the
/// mean negative log probability of the true class; it expects `predictions`
/// rows to already be a softmax output (each row summing to 1 within 1e-9)
/// and `targets` as either one-hot rows of the same shape or a rank-1 tensor
/// of class indices.
pub fn loss_eval(
    kind: LossKind,
    predictions: &Tensor,
    targets: &Tensor,
) -> Result<(f64, Tensor), NnError> {
    if !predictions.is_finite() {
        return Err(NnError::NonFinite("predictions".into()));
    }
    if !targets.is_finite() {
        return Err(NnError::NonFinite("targets".into()));
    }
    match kind {
        LossKind::Mse => {
            if predictions.shape() != targets.shape() {
                return Err(NnError::ShapeMismatch {
                    layer: "mse".into(),
                    dimension: "target elements".into(),
                    expected: predictions.len(),
                    got: targets.len(),
                });
            }
            let n = predictions.len() as f64;
            let mut loss = 0.0;
            let mut grad = vec![0.0; predictions.len()];
            for (g, (&p, &t)) in grad
                .iter_mut()
                .zip(predictions.data().iter().zip(targets.data()))
            {
                let d = p - t;
                loss += d * d;
                *g = 2.0 * d / n;
            }
            Ok((loss / n, Tensor::from_parts(predictions.shape().to_vec(), grad)))
        }
        LossKind::CrossEntropy => {
            let shape = predictions.shape();
            if shape.len() != 2 {
                return Err(NnError::ShapeMismatch {
                    layer: "cross_entropy".into(),
                    dimension: "prediction rank".into(),
                    expected: 2,
                    got: shape.len(),
                });
            }
            let (batch, classes) = (shape[0], shape[1]);
            for b in 0..batch {
                let sum: f64 = predictions.data()[b * classes..(b + 1) * classes].iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(NnError::NotAProbability { row: b, sum });
                }
            }
            let mut loss = 0.0;
            let mut grad = vec![0.0; batch * classes];
            let bf = batch as f64;
            if targets.shape().len() == 1 {
                if targets.len() != batch {
                    return Err(NnError::ShapeMismatch {
                        layer: "cross_entropy".into(),
                        dimension: "target rows".into(),
                        expected: batch,
                        got: targets.len(),
                    });
                }
                for (b, &cls) in targets.data().iter().enumerate() {
                    let c = cls as usize;
                    if cls.fract() != 0.0 || c >= classes {
                        return Err(NnError::ShapeMismatch {
                            layer: "cross_entropy".into(),
                            dimension: "class index".into(),
                            expected: classes - 1,
                            got: c,
                        });
                    }
                    let p = predictions.data()[b * classes + c].max(LOG_FLOOR);
                    loss -= p.ln();
                    grad[b * classes + c] = -1.0 / (bf * p);
                }
            } else {
                if targets.shape() != shape {
                    return Err(NnError::ShapeMismatch {
                        layer: "cross_entropy".into(),
                        dimension: "target elements".into(),
                        expected: predictions.len(),
                        got: targets.len(),
                    });
                }
                for (i, (&p, &t)) in predictions.data().iter().zip(targets.data()).enumerate() {
                    if t != 0.0 {
                        let p = p.max(LOG_FLOOR);
                        loss -= t * p.ln();
                        grad[i] = -t / (bf * p);
                    }
                }
            }
            Ok((loss / bf, Tensor::from_parts(shape.to_vec(), grad)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_zero_at_equal_inputs() {
        let p = Tensor::new(vec![2, 2], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let (loss, grad) = loss_eval(LossKind::Mse, &p, &p).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mse_means_over_all_elements() {
        let p = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let t = Tensor::new(vec![1, 2], vec![0.0, 2.0]).unwrap();
        let (loss, grad) = loss_eval(LossKind::Mse, &p, &t).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.data(), &[1.0, -1.0]);
    }

    #[test]
    fn cross_entropy_uniform_is_ln_k() {
        let p = Tensor::new(vec![1, 4], vec![0.25; 4]).unwrap();
        let t = Tensor::new(vec![1], vec![0.0]).unwrap();
        let (loss, _) = loss_eval(LossKind::CrossEntropy, &p, &t).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_zero_iff_point_mass() {
        let p = Tensor::new(vec![1, 3], vec![1.0, 0.0, 0.0]).unwrap();
        let t = Tensor::new(vec![1], vec![0.0]).unwrap();
        let (loss, _) = loss_eval(LossKind::CrossEntropy, &p, &t).unwrap();
        assert_eq!(loss, 0.0);
        let p = Tensor::new(vec![1, 3], vec![0.9, 0.05, 0.05]).unwrap();
        let (loss, _) = loss_eval(LossKind::CrossEntropy, &p, &t).unwrap();
        assert!(loss > 0.0);
    }

    #[test]
    fn cross_entropy_accepts_one_hot_targets() {
        let p = Tensor::new(vec![2, 2], vec![0.8, 0.2, 0.3, 0.7]).unwrap();
        let idx = Tensor::new(vec![2], vec![0.0, 1.0]).unwrap();
        let hot = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (l1, g1) = loss_eval(LossKind::CrossEntropy, &p, &idx).unwrap();
        let (l2, g2) = loss_eval(LossKind::CrossEntropy, &p, &hot).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        assert_eq!(g1.data(), g2.data());
    }

    #[test]
    fn cross_entropy_rejects_unnormalized_rows() {
        let p = Tensor::new(vec![1, 2], vec![0.8, 0.8]).unwrap();
        let t = Tensor::new(vec![1], vec![0.0]).unwrap();
        assert!(matches!(
            loss_eval(LossKind::CrossEntropy, &p, &t),
            Err(NnError::NotAProbability { .. })
        ));
    }

    #[test]
    fn nan_inputs_are_rejected() {
        let p = Tensor::from_parts(vec![1, 2], vec![f64::NAN, 0.0]);
        let t = Tensor::zeros(vec![1, 2]);
        assert!(matches!(
            loss_eval(LossKind::Mse, &p, &t),
            Err(NnError::NonFinite(_))
        ));
    }
}
