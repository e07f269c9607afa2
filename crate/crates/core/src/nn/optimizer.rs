//! Parameter updates: plain SGD (`W_n = W_o - alpha * grad`) and Adam with
//! bias-corrected moments (beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8).

use super::layer::LayerGrads;
use super::network::{MomentSlots, Network};
use super::NnError;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl Network {
    /// Applies one optimizer step. `grads` must be aligned with the layer
    /// list (as produced by [`Network::backward`]). Frozen layers are
    /// skipped entirely: their parameters and accumulators stay untouched.
    pub fn apply_gradients(
        &mut self,
        grads: &[LayerGrads],
        kind: OptimizerKind,
        learning_rate: f64,
    ) -> Result<(), NnError> {
        if learning_rate <= 0.0 {
            return Err(NnError::BadLearningRate(learning_rate));
        }
        if grads.len() != self.layers.len() {
            return Err(NnError::GradientCountMismatch {
                expected: self.layers.len(),
                got: grads.len(),
            });
        }
        self.step += 1;
        let step = self.step;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if !layer.trainable {
                continue;
            }
            let Some((weights, bias)) = layer.params_mut() else {
                continue;
            };
            let (gw, gb) = match (&grads[i].weights, &grads[i].bias) {
                (Some(w), Some(b)) => (w, b),
                _ => continue,
            };
            check_same_shape(weights, gw)?;
            check_same_shape(bias, gb)?;
            match kind {
                OptimizerKind::Sgd => {
                    sgd_update(weights.data_mut(), gw.data(), learning_rate);
                    sgd_update(bias.data_mut(), gb.data(), learning_rate);
                }
                OptimizerKind::Adam => {
                    let slot = self.slots[i].get_or_insert_with(|| MomentSlots {
                        m_weights: Tensor::zeros(weights.shape().to_vec()),
                        v_weights: Tensor::zeros(weights.shape().to_vec()),
                        m_bias: Tensor::zeros(bias.shape().to_vec()),
                        v_bias: Tensor::zeros(bias.shape().to_vec()),
                    });
                    adam_update(
                        weights.data_mut(),
                        gw.data(),
                        slot.m_weights.data_mut(),
                        slot.v_weights.data_mut(),
                        learning_rate,
                        step,
                    );
                    adam_update(
                        bias.data_mut(),
                        gb.data(),
                        slot.m_bias.data_mut(),
                        slot.v_bias.data_mut(),
                        learning_rate,
                        step,
                    );
                }
            }
        }
        Ok(())
    }
}

fn check_same_shape(param: &Tensor, grad: &Tensor) -> Result<(), NnError> {
    if param.shape() != grad.shape() {
        return Err(NnError::ShapeMismatch {
            layer: "optimizer".into(),
            dimension: "gradient elements".into(),
            expected: param.len(),
            got: grad.len(),
        });
    }
    Ok(())
}

fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, &g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

fn adam_update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, step: u64) {
    let bc1 = 1.0 - ADAM_BETA1.powi(step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(step as i32);
    for (((p, &g), mi), vi) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}
