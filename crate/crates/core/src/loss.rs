//! Categorical cross-entropy and its softmax-coupled gradient.

use alloc::format;

use crate::error::{Error, Result};
use crate::layers::softmax_slice;
use crate::tensor::Tensor;

/// Probabilities are clipped to this floor before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Loss plus its gradient with respect to the pre-softmax logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub grad: Tensor,
    pub probs: Tensor,
}

/// Index of the hot entry, or a validation error if `target` is not one-hot.
pub fn one_hot_index(target: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (i, &v) in target.iter().enumerate() {
        if v == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if v != 0.0 {
            return Err(Error::Validation(format!(
                "target is not one-hot (entry {i} = {v})"
            )));
        }
    }
    hot.ok_or_else(|| Error::Validation("target is not one-hot (no entry equals 1)".into()))
}

fn check_pair(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.rank() != 1 || a.shape() != b.shape() || a.is_empty() {
        return Err(Error::Dimension(format!(
            "loss inputs must be equal-length non-empty vectors, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `-ln(max(p[target], 1e-12))`
pub fn cross_entropy(probs: &Tensor, one_hot_target: &Tensor) -> Result<f64> {
    check_pair(probs, one_hot_target)?;
    let total = probs.data().iter().fold(0.0, |a, &p| a + p);
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let k = one_hot_index(one_hot_target.data())?;
    Ok(clipped_nll(probs.data()[k]))
}

fn clipped_nll(p: f64) -> f64 {
    // -ln(1) is -0.0; normalise so a perfect prediction reports +0.
    -libm::log(p.max(PROB_FLOOR)) + 0.0
}

/// Softmax followed by cross-entropy; the logit gradient is `softmax - target`.
pub fn softmax_ce_grad(logits: &Tensor, one_hot_target: &Tensor) -> Result<LossValue> {
    check_pair(logits, one_hot_target)?;
    let k = one_hot_index(one_hot_target.data())?;
    let probs = softmax_slice(logits.data());
    let loss = clipped_nll(probs[k]);
    let grad = probs
        .iter()
        .zip(one_hot_target.data())
        .map(|(&p, &t)| p - t)
        .collect();
    Ok(LossValue {
        loss,
        grad: Tensor::vector(grad),
        probs: Tensor::vector(probs),
    })
}
