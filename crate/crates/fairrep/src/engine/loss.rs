//! Logistic losses on raw logits.
//!
//! The binary cross-entropy is evaluated directly on logits using
//! `softplus(z) - y*z` with `softplus(z) = max(z, 0) + ln(1 + e^{-|z|})`,
//! which stays finite for any representable logit. A pair of class
//! weights `(w0, w1)` rebalances the two label classes; the loss is the
//! weighted batch mean and the returned gradient is `d(loss)/d(logit)`
//! with the `1/n` factor folded in.

use ndarray::{Array1, Array2};

use super::EngineError;

/// Logistic sigmoid, evaluated branch-wise so neither tail overflows.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Loss value and matching logit gradient from one [`weighted_bce`] call.
#[derive(Debug, Clone)]
pub struct BceOutput {
    pub loss: f64,
    /// `d(loss)/d(logits)`, same shape as the logits, batch-mean factor
    /// included.
    pub grad: Array2<f64>,
}

/// Class-weighted binary cross-entropy on logits.
///
/// `logits` is `n x 1`, `labels` holds 0.0/1.0 values, and
/// `class_weights = (w0, w1)` multiplies the contribution of samples with
/// label 0 and 1 respectively. Loss is
/// `mean_i w_{y_i} * (softplus(z_i) - y_i * z_i)` and the gradient is
/// `w_{y_i} * (sigmoid(z_i) - y_i) / n`. Weights `(1, 1)` recover the
/// unweighted cross-entropy.
pub fn weighted_bce(
    logits: &Array2<f64>,
    labels: &Array1<f64>,
    class_weights: (f64, f64),
) -> Result<BceOutput, EngineError> {
    let n = logits.nrows();
    if logits.ncols() != 1 {
        return Err(EngineError::DimensionMismatch {
            context: "bce logit columns",
            expected: 1,
            actual: logits.ncols(),
        });
    }
    if labels.len() != n {
        return Err(EngineError::DimensionMismatch {
            context: "bce labels",
            expected: n,
            actual: labels.len(),
        });
    }
    if n == 0 {
        return Err(EngineError::DimensionMismatch {
            context: "bce batch size",
            expected: 1,
            actual: 0,
        });
    }
    if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(EngineError::BadHyperparameter(
            "labels must be 0.0 or 1.0".into(),
        ));
    }
    let (w0, w1) = class_weights;
    if !(w0.is_finite() && w1.is_finite() && w0 > 0.0 && w1 > 0.0) {
        return Err(EngineError::BadHyperparameter(format!(
            "class weights must be finite and > 0, got ({w0}, {w1})"
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros((n, 1));
    for i in 0..n {
        let z = logits[[i, 0]];
        let y = labels[i];
        let w = if y == 1.0 { w1 } else { w0 };
        loss += w * (softplus(z) - y * z);
        grad[[i, 0]] = w * (sigmoid(z) - y) * inv_n;
    }
    loss *= inv_n;
    if !loss.is_finite() {
        return Err(EngineError::NonFinite("bce loss"));
    }
    Ok(BceOutput { loss, grad })
}
