//! Network assembly, forward/backward orchestration, freezing, and the
//! optimizer-state container.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{Activation, Conv1dSpec, Conv2dSpec, DenseSpec, Layer, LayerCache, LayerGrads, LayerOp};
use super::NnError;
use crate::tensor::Tensor;

/// First/second-moment accumulators for one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSlots {
    pub m_weights: Tensor,
    pub v_weights: Tensor,
    pub m_bias: Tensor,
    pub v_bias: Tensor,
}

/// Ordered layers plus optimizer state. This is the unit that checkpoints
/// serialize.
#[derive(Debug, Clone)]
pub struct Network {
    pub(crate) layers: Vec<Layer>,
    /// Parallel to `layers`; `Some` once the optimizer has touched the layer.
    pub(crate) slots: Vec<Option<MomentSlots>>,
    pub(crate) step: u64,
    pub(crate) seed: u64,
}

impl Network {
    pub(crate) fn from_parts(
        layers: Vec<Layer>,
        slots: Vec<Option<MomentSlots>>,
        step: u64,
        seed: u64,
    ) -> Self {
        debug_assert_eq!(layers.len(), slots.len());
        Self {
            layers,
            slots,
            step,
            seed,
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable layer access for direct weight surgery (tests, tooling).
    /// Optimizer slots are keyed by position, so reordering is not allowed;
    /// only in-place parameter edits are sound.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Total parameter count over all parameterized layers.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Parameters the optimizer may update.
    pub fn trainable_param_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.trainable)
            .map(|l| l.param_count())
            .sum()
    }

    /// Inference pass.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let mut x = input.clone();
        for layer in &self.layers {
            let (out, _) = layer.forward(&x, false)?;
            x = out;
        }
        Ok(x)
    }

    /// Inference pass that also reports every layer's output shape.
    pub fn forward_trace(&self, input: &Tensor) -> Result<(Tensor, Vec<Vec<usize>>), NnError> {
        let mut x = input.clone();
        let mut shapes = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, _) = layer.forward(&x, false)?;
            shapes.push(out.shape().to_vec());
            x = out;
        }
        Ok((x, shapes))
    }

    /// Forward pass that retains per-layer caches for [`Network::backward`].
    pub fn forward_train(&self, input: &Tensor) -> Result<(Tensor, Vec<LayerCache>), NnError> {
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, cache) = layer.forward(&x, true)?;
            caches.push(cache.expect("cache requested"));
            x = out;
        }
        Ok((x, caches))
    }

    /// Backpropagates `grad_out` through every layer, returning the gradient
    /// w.r.t. the network input and per-layer parameter gradients (aligned
    /// with the layer list).
    pub fn backward(
        &self,
        caches: &[LayerCache],
        grad_out: &Tensor,
    ) -> Result<(Tensor, Vec<LayerGrads>), NnError> {
        if caches.len() != self.layers.len() {
            return Err(NnError::GradientCountMismatch {
                expected: self.layers.len(),
                got: caches.len(),
            });
        }
        let mut grads = vec![LayerGrads::empty(); self.layers.len()];
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gin, lg) = layer.backward(&caches[i], &g)?;
            grads[i] = lg;
            g = gin;
        }
        Ok((g, grads))
    }

    /// Flags every parameterized layer whose name starts with `selector`.
    /// Returns the number of layers matched.
    pub fn set_trainable(&mut self, selector: &str, flag: bool) -> Result<usize, NnError> {
        let mut matched = 0;
        for layer in &mut self.layers {
            if layer.has_params() && layer.name.starts_with(selector) {
                layer.trainable = flag;
                matched += 1;
            }
        }
        if matched == 0 {
            return Err(NnError::SelectorMatchedNothing(selector.to_string()));
        }
        Ok(matched)
    }

    /// Copies parameters from `source` into every parameterized layer whose
    /// name starts with `selector`. Layer structures must agree.
    pub fn replace_params_from(&mut self, source: &Network, selector: &str) -> Result<(), NnError> {
        let mut matched = 0;
        for (layer, src) in self.layers.iter_mut().zip(source.layers.iter()) {
            if !layer.has_params() || !layer.name.starts_with(selector) {
                continue;
            }
            let Some((sw, sb)) = src.params() else {
                return Err(NnError::InvalidSpec(format!(
                    "{}: source layer is not parameterized",
                    layer.name
                )));
            };
            let (sw, sb) = (sw.clone(), sb.clone());
            let name = layer.name.clone();
            let (w, b) = layer.params_mut().expect("checked above");
            if w.shape() != sw.shape() || b.shape() != sb.shape() {
                return Err(NnError::ShapeMismatch {
                    layer: name,
                    dimension: "parameter elements".into(),
                    expected: w.len(),
                    got: sw.len(),
                });
            }
            *w = sw;
            *b = sb;
            matched += 1;
        }
        if matched == 0 {
            return Err(NnError::SelectorMatchedNothing(selector.to_string()));
        }
        Ok(())
    }

    /// Drops optimizer accumulators for layers matching `selector` and
    /// restarts the step counter (used when a re-initialized head begins a
    /// fresh training run).
    pub fn reset_optimizer_for(&mut self, selector: &str) {
        for (layer, slot) in self.layers.iter().zip(self.slots.iter_mut()) {
            if layer.name.starts_with(selector) {
                *slot = None;
            }
        }
        self.step = 0;
    }

    /// Byte-level equality of two layers' parameters, used by the freeze
    /// contract tests.
    pub fn params_bitwise_eq(&self, other: &Network, name: &str) -> bool {
        match (self.layer(name), other.layer(name)) {
            (Some(a), Some(b)) => match (a.params(), b.params()) {
                (Some((wa, ba)), Some((wb, bb))) => {
                    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                    bits(wa) == bits(wb) && bits(ba) == bits(bb)
                }
                _ => false,
            },
            _ => false,
        }
    }
}

/// Builds networks layer by layer with seeded weight initialization:
/// He-uniform for layers feeding a ReLU, Xavier-uniform otherwise, zero bias.
pub struct NetworkBuilder {
    layers: Vec<Layer>,
    rng: ChaCha8Rng,
    seed: u64,
    conv_count: usize,
    dense_count: usize,
    pool_count: usize,
    flatten_count: usize,
}

impl NetworkBuilder {
    pub fn new(seed: u64) -> Self {
        Self {
            layers: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            conv_count: 0,
            dense_count: 0,
            pool_count: 0,
            flatten_count: 0,
        }
    }

    fn uniform_tensor(&mut self, shape: Vec<usize>, limit: f64) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| self.rng.random_range(-limit..limit))
            .collect();
        Tensor::from_parts(shape, data)
    }

    pub fn conv1d(mut self, spec: Conv1dSpec, relu: bool) -> Self {
        let fan_in = (spec.in_channels * spec.kernel_size) as f64;
        let fan_out = (spec.out_channels * spec.kernel_size) as f64;
        let limit = if relu {
            (6.0 / fan_in).sqrt()
        } else {
            (6.0 / (fan_in + fan_out)).sqrt()
        };
        let weights = self.uniform_tensor(
            vec![spec.out_channels, spec.in_channels, spec.kernel_size],
            limit,
        );
        let bias = Tensor::zeros(vec![spec.out_channels]);
        self.conv_count += 1;
        self.layers.push(Layer {
            name: format!("conv{}", self.conv_count),
            op: LayerOp::Conv1d {
                spec,
                weights,
                bias,
                relu,
            },
            trainable: true,
        });
        self
    }

    pub fn conv2d(mut self, spec: Conv2dSpec, relu: bool) -> Self {
        let fan_in = (spec.in_channels * spec.kernel.0 * spec.kernel.1) as f64;
        let fan_out = (spec.out_channels * spec.kernel.0 * spec.kernel.1) as f64;
        let limit = if relu {
            (6.0 / fan_in).sqrt()
        } else {
            (6.0 / (fan_in + fan_out)).sqrt()
        };
        let weights = self.uniform_tensor(
            vec![
                spec.out_channels,
                spec.in_channels,
                spec.kernel.0,
                spec.kernel.1,
            ],
            limit,
        );
        let bias = Tensor::zeros(vec![spec.out_channels]);
        self.conv_count += 1;
        self.layers.push(Layer {
            name: format!("conv{}", self.conv_count),
            op: LayerOp::Conv2d {
                spec,
                weights,
                bias,
                relu,
            },
            trainable: true,
        });
        self
    }

    pub fn dense(mut self, spec: DenseSpec) -> Self {
        let fan_in = spec.in_features as f64;
        let fan_out = spec.out_features as f64;
        let limit = if spec.activation == Activation::Relu {
            (6.0 / fan_in).sqrt()
        } else {
            (6.0 / (fan_in + fan_out)).sqrt()
        };
        let weights = self.uniform_tensor(vec![spec.in_features, spec.out_features], limit);
        let bias = Tensor::zeros(vec![spec.out_features]);
        self.dense_count += 1;
        self.layers.push(Layer {
            name: format!("dense{}", self.dense_count),
            op: LayerOp::Dense {
                spec,
                weights,
                bias,
            },
            trainable: true,
        });
        self
    }

    pub fn max_pool2d(mut self, size: (usize, usize)) -> Self {
        self.pool_count += 1;
        self.layers.push(Layer {
            name: format!("pool{}", self.pool_count),
            op: LayerOp::MaxPool2d { size },
            trainable: false,
        });
        self
    }

    pub fn flatten(mut self) -> Self {
        self.flatten_count += 1;
        self.layers.push(Layer {
            name: format!("flatten{}", self.flatten_count),
            op: LayerOp::Flatten,
            trainable: false,
        });
        self
    }

    pub fn build(self) -> Network {
        let slots = vec![None; self.layers.len()];
        Network {
            layers: self.layers,
            slots,
            step: 0,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_net(seed: u64) -> Network {
        NetworkBuilder::new(seed)
            .conv1d(Conv1dSpec::new(1, 2, 3, 1, 0).unwrap(), true)
            .flatten()
            .dense(DenseSpec::new(12, 4, Activation::Relu).unwrap())
            .dense(DenseSpec::new(4, 2, Activation::None).unwrap())
            .build()
    }

    #[test]
    fn same_seed_same_weights() {
        let a = small_net(7);
        let b = small_net(7);
        for l in ["conv1", "dense1", "dense2"] {
            assert!(a.params_bitwise_eq(&b, l), "layer {l} differs");
        }
        let c = small_net(8);
        assert!(!a.params_bitwise_eq(&c, "conv1"));
    }

    #[test]
    fn forward_trace_reports_shapes() {
        let net = small_net(1);
        let input = Tensor::zeros(vec![3, 1, 8]);
        let (out, shapes) = net.forward_trace(&input).unwrap();
        assert_eq!(out.shape(), &[3, 2]);
        assert_eq!(
            shapes,
            vec![vec![3, 2, 6], vec![3, 12], vec![3, 4], vec![3, 2]]
        );
    }

    #[test]
    fn selector_freezes_matching_layers() {
        let mut net = small_net(1);
        let n = net.set_trainable("conv", false).unwrap();
        assert_eq!(n, 1);
        assert_eq!(
            net.trainable_param_count(),
            12 * 4 + 4 + 4 * 2 + 2
        );
        let err = net.set_trainable("lstm", false).unwrap_err();
        assert!(matches!(err, NnError::SelectorMatchedNothing(_)));
        // Non-parameterized layers never match.
        assert!(net.set_trainable("flatten", false).is_err());
        // Freeze-then-unfreeze round trip.
        net.set_trainable("conv", true).unwrap();
        assert_eq!(net.trainable_param_count(), net.param_count());
    }

    #[test]
    fn param_count_sums_layers() {
        let net = small_net(1);
        assert_eq!(net.param_count(), (2 * 3 + 2) + (12 * 4 + 4) + (4 * 2 + 2));
    }
}
