//! Signature-image classifiers: the simple deep NN (1904 -> 500 -> 150 ->
//! 20) and a compact 2D-CNN backbone feeding swappable dense heads, trained
//! with cross-entropy and SGD.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::{precision_recall_f1, ConfusionMatrix, MetricSet, MetricsError};
use crate::nn::{
    loss_eval, Activation, Conv2dSpec, DenseSpec, LossKind, Network, NetworkBuilder, NnError,
    OptimizerKind,
};
use crate::tensor::Tensor;

/// Output width of every classifier; 19 appliance classes plus one
/// reserved slot.
pub const CLASS_COUNT: usize = 20;
/// Signature image size (width, height); 56 * 34 = 1904 flattened.
pub const IMAGE_W: usize = 56;
pub const IMAGE_H: usize = 34;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("image {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    ImageSize {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("class {0} has no images in the training split")]
    ClassAbsent(usize),
    #[error("class index {index} exceeds populated class count {populated}")]
    ClassIndexOutOfRange { index: usize, populated: usize },
    #[error("no images supplied")]
    Empty,
}

/// Dense-head presets mirroring the published custom FC stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadPreset {
    /// [2500, 2000], [2000, 1500], [1500, 500], [500, 20].
    ResNetStyle,
    /// [4096, 1024], [1024, 20].
    AlexNetStyle,
    /// [1024, 512], [512, 20].
    DenseNetStyle,
}

impl HeadPreset {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "resnet" | "resnet-style" | "resnet18" => Some(HeadPreset::ResNetStyle),
            "alexnet" | "alexnet-style" => Some(HeadPreset::AlexNetStyle),
            "densenet" | "densenet-style" | "densenet121" => Some(HeadPreset::DenseNetStyle),
            _ => None,
        }
    }

    pub fn dense_pairs(&self) -> &'static [(usize, usize)] {
        match self {
            HeadPreset::ResNetStyle => &[(2500, 2000), (2000, 1500), (1500, 500), (500, 20)],
            HeadPreset::AlexNetStyle => &[(4096, 1024), (1024, 20)],
            HeadPreset::DenseNetStyle => &[(1024, 512), (512, 20)],
        }
    }

    pub fn fc1_input(&self) -> usize {
        self.dense_pairs()[0].0
    }
}

/// The simple deep NN: flatten, 1904 -> 500 ReLU, 500 -> 150 ReLU,
/// 150 -> 20 softmax.
pub fn build_simple_dnn(seed: u64) -> Network {
    NetworkBuilder::new(seed)
        .flatten()
        .dense(DenseSpec::new(IMAGE_W * IMAGE_H, 500, Activation::Relu).expect("static dims"))
        .dense(DenseSpec::new(500, 150, Activation::Relu).expect("static dims"))
        .dense(DenseSpec::new(150, CLASS_COUNT, Activation::Softmax).expect("static dims"))
        .build()
}

/// Compact 2D-CNN backbone (conv 1->16 3x3 + pool, conv 16->32 3x3 + pool,
/// flatten, projection dense) feeding the preset's dense pairs verbatim,
/// ReLU between layers and softmax at the output.
pub fn build_compact_cnn(preset: HeadPreset, seed: u64) -> Result<Network, ClassifierError> {
    let conv1 = Conv2dSpec::new(1, 16, (3, 3), (1, 1), (1, 1))?;
    let conv2 = Conv2dSpec::new(16, 32, (3, 3), (1, 1), (1, 1))?;
    // 34x56 -> pool 17x28 -> pool 8x14; 32 * 8 * 14 = 3584.
    let flattened = 32 * (IMAGE_H / 2 / 2) * (IMAGE_W / 2 / 2);
    let mut builder = NetworkBuilder::new(seed)
        .conv2d(conv1, true)
        .max_pool2d((2, 2))
        .conv2d(conv2, true)
        .max_pool2d((2, 2))
        .flatten()
        .dense(DenseSpec::new(flattened, preset.fc1_input(), Activation::Relu)?);
    let pairs = preset.dense_pairs();
    for (i, &(from, to)) in pairs.iter().enumerate() {
        let activation = if i + 1 == pairs.len() {
            Activation::Softmax
        } else {
            Activation::Relu
        };
        builder = builder.dense(DenseSpec::new(from, to, activation)?);
    }
    Ok(builder.build())
}

/// One training/evaluation image: grayscale pixels in [0, 1] with a class
/// index.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub pixels: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub class_idx: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifierTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl ClassifierTrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            learning_rate: 0.01,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierReport {
    pub epoch_losses: Vec<f64>,
    pub epoch_train_accuracy: Vec<f64>,
}

fn batch_tensor(images: &[&LabeledImage]) -> (Tensor, Tensor) {
    let (w, h) = (images[0].width, images[0].height);
    let mut pixels = Vec::with_capacity(images.len() * w * h);
    let mut classes = Vec::with_capacity(images.len());
    for img in images {
        pixels.extend_from_slice(&img.pixels);
        classes.push(img.class_idx as f64);
    }
    (
        Tensor::from_parts(vec![images.len(), 1, h, w], pixels),
        Tensor::from_parts(vec![images.len()], classes),
    )
}

fn check_images(
    images: &[LabeledImage],
    populated_classes: usize,
) -> Result<(), ClassifierError> {
    if images.is_empty() {
        return Err(ClassifierError::Empty);
    }
    for (index, img) in images.iter().enumerate() {
        if img.width != IMAGE_W || img.height != IMAGE_H {
            return Err(ClassifierError::ImageSize {
                index,
                got_w: img.width,
                got_h: img.height,
                want_w: IMAGE_W,
                want_h: IMAGE_H,
            });
        }
        if img.class_idx >= populated_classes {
            return Err(ClassifierError::ClassIndexOutOfRange {
                index: img.class_idx,
                populated: populated_classes,
            });
        }
    }
    Ok(())
}

/// Cross-entropy + SGD training over the labeled images. Every populated
/// class must appear in the training set.
pub fn train_classifier(
    network: &mut Network,
    images: &[LabeledImage],
    populated_classes: usize,
    config: &ClassifierTrainConfig,
) -> Result<ClassifierReport, ClassifierError> {
    check_images(images, populated_classes)?;
    for c in 0..populated_classes {
        if !images.iter().any(|i| i.class_idx == c) {
            return Err(ClassifierError::ClassAbsent(c));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut epoch_train_accuracy = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let refs: Vec<&LabeledImage> = chunk.iter().map(|&i| &images[i]).collect();
            let (x, y) = batch_tensor(&refs);
            let (out, caches) = network.forward_train(&x)?;
            let (loss, grad) = loss_eval(LossKind::CrossEntropy, &out, &y)?;
            let (_, grads) = network.backward(&caches, &grad)?;
            network.apply_gradients(&grads, OptimizerKind::Sgd, config.learning_rate)?;
            loss_sum += loss;
            batches += 1;
        }
        epoch_losses.push(loss_sum / batches as f64);
        let (correct, total) = count_correct(network, images, populated_classes)?;
        epoch_train_accuracy.push(correct as f64 * 100.0 / total as f64);
    }
    Ok(ClassifierReport {
        epoch_losses,
        epoch_train_accuracy,
    })
}

fn count_correct(
    network: &Network,
    images: &[LabeledImage],
    populated_classes: usize,
) -> Result<(usize, usize), ClassifierError> {
    let mut correct = 0;
    for chunk in images.chunks(64) {
        let refs: Vec<&LabeledImage> = chunk.iter().collect();
        let (x, _) = batch_tensor(&refs);
        let out = network.forward(&x)?;
        for (i, img) in chunk.iter().enumerate() {
            if argmax_populated(out.data(), i, populated_classes) == img.class_idx {
                correct += 1;
            }
        }
    }
    Ok((correct, images.len()))
}

/// Decision rule: argmax over the populated class logits (the reserved
/// slots of the 20-wide output never win).
fn argmax_populated(data: &[f64], row: usize, populated_classes: usize) -> usize {
    let base = row * CLASS_COUNT;
    let mut best = 0usize;
    for c in 1..populated_classes {
        if data[base + c] > data[base + best] {
            best = c;
        }
    }
    best
}

/// Argmax evaluation over a test set: confusion matrix plus accuracy and
/// macro-F1.
pub fn evaluate_classifier(
    network: &Network,
    images: &[LabeledImage],
    populated_classes: usize,
) -> Result<(ConfusionMatrix, MetricSet), ClassifierError> {
    check_images(images, populated_classes)?;
    let mut matrix = ConfusionMatrix::new(populated_classes);
    for chunk in images.chunks(64) {
        let refs: Vec<&LabeledImage> = chunk.iter().collect();
        let (x, _) = batch_tensor(&refs);
        let out = network.forward(&x)?;
        for (i, img) in chunk.iter().enumerate() {
            let pred = argmax_populated(out.data(), i, populated_classes);
            matrix.record(img.class_idx, pred)?;
        }
    }
    let metrics = precision_recall_f1(&matrix)?;
    Ok((matrix, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;
    use rand::Rng;

    fn toy_images(n_per_class: usize, seed: u64) -> Vec<LabeledImage> {
        // Class 0: bright left half; class 1: bright right half.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images = Vec::new();
        for class in 0..2usize {
            for _ in 0..n_per_class {
                let mut pixels = vec![0.0; IMAGE_W * IMAGE_H];
                for y in 0..IMAGE_H {
                    for x in 0..IMAGE_W {
                        let bright = if class == 0 { x < IMAGE_W / 2 } else { x >= IMAGE_W / 2 };
                        let base: f64 = if bright { 0.85 } else { 0.15 };
                        pixels[y * IMAGE_W + x] =
                            (base + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0);
                    }
                }
                images.push(LabeledImage {
                    pixels,
                    width: IMAGE_W,
                    height: IMAGE_H,
                    class_idx: class,
                });
            }
        }
        images
    }

    #[test]
    fn simple_dnn_shapes_and_parameter_count() {
        let net = build_simple_dnn(1);
        // 1904*500 + 500 + 500*150 + 150 + 150*20 + 20.
        assert_eq!(net.param_count(), 1_030_670);
        let imgs = toy_images(2, 3);
        let refs: Vec<&LabeledImage> = imgs.iter().take(3).collect();
        let (x, _) = batch_tensor(&refs);
        let out = net.forward(&x).unwrap();
        assert_eq!(out.shape(), &[3, CLASS_COUNT]);
        for row in 0..3 {
            let sum: f64 = out.data()[row * CLASS_COUNT..(row + 1) * CLASS_COUNT].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn head_presets_have_published_shapes() {
        let resnet = build_compact_cnn(HeadPreset::ResNetStyle, 1).unwrap();
        let dense_outs: Vec<usize> = resnet
            .layers()
            .iter()
            .filter_map(|l| match &l.op {
                crate::nn::LayerOp::Dense { spec, .. } => Some(spec.out_features),
                _ => None,
            })
            .collect();
        assert_eq!(dense_outs, vec![2500, 2000, 1500, 500, 20]);

        let densenet = build_compact_cnn(HeadPreset::DenseNetStyle, 1).unwrap();
        let dense_pairs: Vec<(usize, usize)> = densenet
            .layers()
            .iter()
            .filter_map(|l| match &l.op {
                crate::nn::LayerOp::Dense { spec, .. } => {
                    Some((spec.in_features, spec.out_features))
                }
                _ => None,
            })
            .collect();
        assert_eq!(dense_pairs.last(), Some(&(512, 20)));
        assert_eq!(dense_pairs[dense_pairs.len() - 2].1, 512);

        let alexnet = build_compact_cnn(HeadPreset::AlexNetStyle, 1).unwrap();
        let out = alexnet
            .forward(&Tensor::zeros(vec![1, 1, IMAGE_H, IMAGE_W]))
            .unwrap();
        assert_eq!(out.shape(), &[1, CLASS_COUNT]);
        let sum: f64 = out.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separable_toy_set_reaches_full_accuracy() {
        let train = toy_images(8, 10);
        let test = toy_images(4, 11);
        let mut net = build_simple_dnn(42);
        train_classifier(
            &mut net,
            &train,
            2,
            &ClassifierTrainConfig {
                epochs: 12,
                ..ClassifierTrainConfig::new(42)
            },
        )
        .unwrap();
        let (matrix, metrics) = evaluate_classifier(&net, &test, 2).unwrap();
        assert_eq!(metrics.accuracy_pct, 100.0, "matrix: {matrix:?}");
    }

    #[test]
    fn absent_class_is_rejected() {
        let mut images = toy_images(3, 1);
        images.retain(|i| i.class_idx == 0);
        let mut net = build_simple_dnn(1);
        assert!(matches!(
            train_classifier(&mut net, &images, 2, &ClassifierTrainConfig::new(1)),
            Err(ClassifierError::ClassAbsent(1))
        ));
    }

    #[test]
    fn wrong_image_size_is_rejected() {
        let images = vec![LabeledImage {
            pixels: vec![0.0; 100],
            width: 10,
            height: 10,
            class_idx: 0,
        }];
        let net = build_simple_dnn(1);
        assert!(matches!(
            evaluate_classifier(&net, &images, 1),
            Err(ClassifierError::ImageSize { .. })
        ));
    }

    #[test]
    fn compact_cnn_gradients_verify() {
        // A miniature of the same graph shape (conv2d + pool + dense +
        // softmax/cross-entropy) on an 8-image 2-class instance.
        let mut net = NetworkBuilder::new(9)
            .conv2d(Conv2dSpec::new(1, 2, (3, 3), (1, 1), (1, 1)).unwrap(), true)
            .max_pool2d((2, 2))
            .flatten()
            .dense(DenseSpec::new(2 * 3 * 4, 2, Activation::Softmax).unwrap())
            .build();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::from_parts(
            vec![8, 1, 6, 8],
            (0..8 * 48).map(|_| rng.random_range(0.0..1.0)).collect(),
        );
        let y = Tensor::from_parts(vec![8], (0..8).map(|i| (i % 2) as f64).collect());
        let disc =
            finite_difference_check(&mut net, &x, &y, LossKind::CrossEntropy, 1e-5).unwrap();
        assert!(disc < 1e-4, "discrepancy {disc}");
    }

    #[test]
    fn training_curves_are_deterministic() {
        let images = toy_images(4, 5);
        let cfg = ClassifierTrainConfig {
            epochs: 3,
            ..ClassifierTrainConfig::new(7)
        };
        let mut a = build_simple_dnn(7);
        let ra = train_classifier(&mut a, &images, 2, &cfg).unwrap();
        let mut b = build_simple_dnn(7);
        let rb = train_classifier(&mut b, &images, 2, &cfg).unwrap();
        assert_eq!(ra.epoch_losses, rb.epoch_losses);
        assert_eq!(ra.epoch_train_accuracy, rb.epoch_train_accuracy);
    }
}
