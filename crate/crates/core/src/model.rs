//! The classifier stack and its end-to-end forward/backward pass:
//!
//! ```text
//! (F,1) → Conv(32,k3) → ReLU → MaxPool(2) → Conv(64,k3) → ReLU → MaxPool(2)
//!       → Flatten → Dense(128) → ReLU → Dense(C) → Softmax
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layers::{
    flatten, maxpool1d_backward, maxpool1d_forward, relu, relu_backward, Conv1DLayer, DenseLayer,
    Pooled,
};
use crate::loss::{softmax_ce_grad, LossValue};
use crate::optim::glorot_uniform_init;
use crate::tensor::Tensor;

/// Parameter tensors in storage and optimizer order.
pub const PARAM_NAMES: [&str; 8] = [
    "conv1.weights",
    "conv1.bias",
    "conv2.weights",
    "conv2.bias",
    "dense1.weights",
    "dense1.bias",
    "output.weights",
    "output.bias",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchitectureConfig {
    pub feature_count: usize,
    pub class_count: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub dense_units: usize,
}

/// Sequence lengths after each length-changing stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeChain {
    pub conv1: usize,
    pub pool1: usize,
    pub conv2: usize,
    pub pool2: usize,
    /// `pool2 * conv2_filters`
    pub flatten: usize,
}

impl ArchitectureConfig {
    /// 32/64 filters of width 3, pooling by 2, 128 hidden units.
    pub fn new(feature_count: usize, class_count: usize) -> Self {
        ArchitectureConfig {
            feature_count,
            class_count,
            conv1_filters: 32,
            conv2_filters: 64,
            kernel_size: 3,
            pool_size: 2,
            dense_units: 128,
        }
    }

    /// Zero lengths mean the stage cannot run on that input.
    pub fn shape_chain_for(&self, feature_count: usize) -> ShapeChain {
        let conv = |l: usize| {
            if l >= self.kernel_size {
                l - self.kernel_size + 1
            } else {
                0
            }
        };
        let pool = |l: usize| l.checked_div(self.pool_size).unwrap_or(0);
        let conv1 = conv(feature_count);
        let pool1 = pool(conv1);
        let conv2 = conv(pool1);
        let pool2 = pool(conv2);
        ShapeChain {
            conv1,
            pool1,
            conv2,
            pool2,
            flatten: pool2 * self.conv2_filters,
        }
    }

    pub fn shape_chain(&self) -> ShapeChain {
        self.shape_chain_for(self.feature_count)
    }

    /// Smallest feature count whose shape chain stays non-empty.
    pub fn min_feature_count(&self) -> usize {
        (1..)
            .find(|&f| self.shape_chain_for(f).flatten > 0)
            .unwrap_or(usize::MAX)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.conv1_filters,
            self.conv2_filters,
            self.kernel_size,
            self.pool_size,
            self.dense_units,
        ];
        if positive.contains(&0) {
            return Err(Error::Config(format!(
                "architecture has a zero-sized stage: {self:?}"
            )));
        }
        if self.class_count == 0 {
            return Err(Error::Config("class count must be at least 1".into()));
        }
        if self.shape_chain().flatten == 0 {
            return Err(Error::Config(format!(
                "feature count {} is too small for the layer stack: at least {} features are required",
                self.feature_count,
                self.min_feature_count()
            )));
        }
        Ok(())
    }

    /// Expected shape of each parameter tensor, in [`PARAM_NAMES`] order.
    pub fn param_shapes(&self) -> [Vec<usize>; 8] {
        let k = self.kernel_size;
        let flat = self.shape_chain().flatten;
        [
            vec![self.conv1_filters, 1, k],
            vec![self.conv1_filters],
            vec![self.conv2_filters, self.conv1_filters, k],
            vec![self.conv2_filters],
            vec![self.dense_units, flat],
            vec![self.dense_units],
            vec![self.class_count, self.dense_units],
            vec![self.class_count],
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: ArchitectureConfig,
    pub conv1: Conv1DLayer,
    pub conv2: Conv1DLayer,
    pub dense1: DenseLayer,
    pub output: DenseLayer,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub input: Tensor,
    pub conv1: Tensor,
    pub relu1: Tensor,
    pub pool1: Pooled,
    pub conv2: Tensor,
    pub relu2: Tensor,
    pub pool2: Pooled,
    pub flat: Tensor,
    pub dense1: Tensor,
    pub relu3: Tensor,
    pub logits: Tensor,
}

/// Glorot-uniform weights and zero biases for `arch`.
pub fn build_model<R: rand::Rng + ?Sized>(
    arch: ArchitectureConfig,
    rng: &mut R,
) -> Result<ModelParams> {
    arch.validate()?;
    let [w1, b1, w2, b2, w3, b3, w4, b4] = arch.param_shapes();
    let k = arch.kernel_size;
    let conv1_w = glorot_uniform_init(&w1, k, arch.conv1_filters * k, rng)?;
    let conv2_w = glorot_uniform_init(&w2, arch.conv1_filters * k, arch.conv2_filters * k, rng)?;
    let dense1_w = glorot_uniform_init(&w3, w3[1], w3[0], rng)?;
    let output_w = glorot_uniform_init(&w4, w4[1], w4[0], rng)?;
    ModelParams::from_tensors(
        arch,
        vec![
            conv1_w,
            Tensor::zeros(&b1)?,
            conv2_w,
            Tensor::zeros(&b2)?,
            dense1_w,
            Tensor::zeros(&b3)?,
            output_w,
            Tensor::zeros(&b4)?,
        ],
    )
}

impl ModelParams {
    /// Assembles a model from tensors in [`PARAM_NAMES`] order, checking
    /// every shape against `arch`.
    pub fn from_tensors(arch: ArchitectureConfig, tensors: Vec<Tensor>) -> Result<Self> {
        arch.validate()?;
        if tensors.len() != PARAM_NAMES.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameter tensors, got {}",
                PARAM_NAMES.len(),
                tensors.len()
            )));
        }
        for ((t, want), name) in tensors.iter().zip(arch.param_shapes()).zip(PARAM_NAMES) {
            if t.shape() != want.as_slice() {
                return Err(Error::Dimension(format!(
                    "{name} has shape {:?}, architecture needs {want:?}",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} contains non-finite values"
                )));
            }
        }
        let [w1, b1, w2, b2, w3, b3, w4, b4]: [Tensor; 8] = tensors
            .try_into()
            .map_err(|_| Error::Internal("parameter count changed".into()))?;
        Ok(ModelParams {
            arch,
            conv1: Conv1DLayer::new(w1, b1)?,
            conv2: Conv1DLayer::new(w2, b2)?,
            dense1: DenseLayer::new(w3, b3)?,
            output: DenseLayer::new(w4, b4)?,
        })
    }

    pub fn params(&self) -> [&Tensor; 8] {
        [
            &self.conv1.weights,
            &self.conv1.bias,
            &self.conv2.weights,
            &self.conv2.bias,
            &self.dense1.weights,
            &self.dense1.bias,
            &self.output.weights,
            &self.output.bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.conv1.weights,
            &mut self.conv1.bias,
            &mut self.conv2.weights,
            &mut self.conv2.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Accepts a `(F, 1)` sequence or a flat `(F,)` vector.
    fn as_sequence(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.arch.feature_count;
        match x.shape() {
            [n, 1] if *n == f => Ok(x.clone()),
            [n] if *n == f => x.reshape(&[f, 1]),
            s => Err(Error::Dimension(format!(
                "model expects ({f}, 1) input, got {s:?}"
            ))),
        }
    }

    pub fn forward_trace(&self, x: &Tensor) -> Result<Trace> {
        let input = self.as_sequence(x)?;
        let conv1 = self.conv1.forward(&input)?;
        let relu1 = relu(&conv1);
        let pool1 = maxpool1d_forward(&relu1, self.arch.pool_size)?;
        let conv2 = self.conv2.forward(&pool1.output)?;
        let relu2 = relu(&conv2);
        let pool2 = maxpool1d_forward(&relu2, self.arch.pool_size)?;
        let flat = flatten(&pool2.output);
        let dense1 = self.dense1.forward(&flat)?;
        let relu3 = relu(&dense1);
        let logits = self.output.forward(&relu3)?;
        Ok(Trace {
            input,
            conv1,
            relu1,
            pool1,
            conv2,
            relu2,
            pool2,
            flat,
            dense1,
            relu3,
            logits,
        })
    }

    /// Pre-softmax scores for one sample.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_trace(x)?.logits)
    }

    /// Parameter gradients (in [`PARAM_NAMES`] order) given the gradient of
    /// the loss with respect to the logits.
    pub fn backward(&self, trace: &Trace, d_logits: &Tensor) -> Result<Vec<Tensor>> {
        let out = self.output.backward(&trace.relu3, d_logits)?;
        let d_dense1 = relu_backward(&trace.dense1, &out.d_input)?;
        let hid = self.dense1.backward(&trace.flat, &d_dense1)?;
        let d_pool2 = hid.d_input.into_reshaped(trace.pool2.output.shape())?;
        let d_relu2 = maxpool1d_backward(&trace.pool2.argmax, &d_pool2, trace.relu2.shape())?;
        let d_conv2 = relu_backward(&trace.conv2, &d_relu2)?;
        let c2 = self.conv2.backward(&trace.pool1.output, &d_conv2)?;
        let d_relu1 = maxpool1d_backward(&trace.pool1.argmax, &c2.d_input, trace.relu1.shape())?;
        let d_conv1 = relu_backward(&trace.conv1, &d_relu1)?;
        let c1 = self.conv1.backward(&trace.input, &d_conv1)?;
        Ok(vec![
            c1.d_weights,
            c1.d_bias,
            c2.d_weights,
            c2.d_bias,
            hid.d_weights,
            hid.d_bias,
            out.d_weights,
            out.d_bias,
        ])
    }

    /// Cross-entropy loss of one sample and its parameter gradients.
    pub fn loss_and_grads(
        &self,
        x: &Tensor,
        one_hot_target: &Tensor,
    ) -> Result<(LossValue, Vec<Tensor>)> {
        let trace = self.forward_trace(x)?;
        let lv = softmax_ce_grad(&trace.logits, one_hot_target)?;
        let grads = self.backward(&trace, &lv.grad)?;
        Ok((lv, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn sixteen_features_flatten_to_128() {
        let arch = ArchitectureConfig::new(16, 3);
        let chain = arch.shape_chain();
        assert_eq!(
            (chain.conv1, chain.pool1, chain.conv2, chain.pool2),
            (14, 7, 5, 2)
        );
        assert_eq!(chain.flatten, 128);
        let m = build_model(arch, &mut seeded_rng(1)).unwrap();
        assert_eq!(m.dense1.weights.shape(), &[128, 128]);
        assert_eq!(m.output.weights.shape(), &[3, 128]);
    }

    #[test]
    fn too_few_features_rejected_with_minimum() {
        let err = build_model(ArchitectureConfig::new(7, 3), &mut seeded_rng(1)).unwrap_err();
        assert!(
            matches!(err, Error::Config(ref m) if m.contains("at least 10")),
            "{err}"
        );
        // 9 → 7 → 3 → 1 → 0
        assert!(ArchitectureConfig::new(9, 2).validate().is_err());
        assert!(ArchitectureConfig::new(10, 2).validate().is_ok());
        assert_eq!(ArchitectureConfig::new(10, 2).min_feature_count(), 10);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let arch = ArchitectureConfig::new(12, 4);
        let a = build_model(arch, &mut seeded_rng(5)).unwrap();
        let b = build_model(arch, &mut seeded_rng(5)).unwrap();
        assert_eq!(a, b);
        for (i, t) in a.params().iter().enumerate() {
            if i % 2 == 1 {
                assert!(t.data().iter().all(|&v| v == 0.0));
            }
        }
        assert_ne!(a, build_model(arch, &mut seeded_rng(6)).unwrap());
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let arch = ArchitectureConfig::new(12, 2);
        let m = build_model(arch, &mut seeded_rng(0)).unwrap();
        let mut ts: Vec<Tensor> = m.params().iter().map(|t| (*t).clone()).collect();
        ts[7] = Tensor::zeros(&[3]).unwrap();
        let err = ModelParams::from_tensors(arch, ts).unwrap_err();
        assert!(matches!(err, Error::Dimension(ref s) if s.contains("output.bias")));
    }

    #[test]
    fn gradients_have_param_shapes() {
        let arch = ArchitectureConfig::new(12, 3);
        let m = build_model(arch, &mut seeded_rng(2)).unwrap();
        let x = Tensor::vector((0..12).map(|i| i as f64 * 0.1 - 0.4).collect());
        let target = Tensor::vector(vec![0.0, 1.0, 0.0]);
        let (lv, grads) = m.loss_and_grads(&x, &target).unwrap();
        assert!(lv.loss > 0.0);
        for (g, p) in grads.iter().zip(m.params()) {
            assert_eq!(g.shape(), p.shape());
        }
    }
}
