//! AdaDelta parameter updates.
//!
//! Per coordinate, with decay `rho` and stabilizer `eps`:
//!
//! ```text
//! Eg  <- rho*Eg + (1-rho)*g^2
//! d    = -lr * sqrt(Ed + eps) / sqrt(Eg + eps) * g
//! Ed  <- rho*Ed + (1-rho)*d^2
//! p   <- p + d
//! ```
//!
//! Both accumulators start at zero, so the very first update moves by
//! `-lr * sqrt(eps / ((1-rho)*g^2 + eps)) * g`. The state mirrors the
//! network layer layout so a state built for one net shape rejects
//! gradients from another.

use ndarray::{Array1, Array2};

use super::net::{DenseNet, NetGrads};
use super::EngineError;

/// AdaDelta hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaDeltaConfig {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
}

impl Default for AdaDeltaConfig {
    fn default() -> Self {
        Self {
            rho: 0.95,
            eps: 1e-6,
            lr: 1.0,
        }
    }
}

impl AdaDeltaConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.rho.is_finite() && (0.0..1.0).contains(&self.rho)) {
            return Err(EngineError::BadHyperparameter(format!(
                "rho must be in [0, 1), got {}",
                self.rho
            )));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(EngineError::BadHyperparameter(format!(
                "eps must be > 0, got {}",
                self.eps
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(EngineError::BadHyperparameter(format!(
                "lr must be > 0, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// One coordinate's update. `acc` is `(Eg, Ed)` carried between calls.
/// Returns the applied delta; the caller adds it to the parameter.
pub fn adadelta_scalar(grad: f64, acc: &mut (f64, f64), cfg: &AdaDeltaConfig) -> f64 {
    acc.0 = cfg.rho * acc.0 + (1.0 - cfg.rho) * grad * grad;
    let delta = -cfg.lr * ((acc.1 + cfg.eps).sqrt() / (acc.0 + cfg.eps).sqrt()) * grad;
    acc.1 = cfg.rho * acc.1 + (1.0 - cfg.rho) * delta * delta;
    delta
}

#[derive(Debug, Clone)]
struct LayerAcc {
    weight_eg: Array2<f64>,
    weight_ed: Array2<f64>,
    bias_eg: Array1<f64>,
    bias_ed: Array1<f64>,
}

/// Running accumulators for every parameter of one [`DenseNet`].
#[derive(Debug, Clone)]
pub struct AdaDeltaState {
    cfg: AdaDeltaConfig,
    layers: Vec<LayerAcc>,
}

impl AdaDeltaState {
    /// Zero accumulators shaped like `net`.
    pub fn new(net: &DenseNet, cfg: AdaDeltaConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerAcc {
                weight_eg: Array2::zeros(l.weight.dim()),
                weight_ed: Array2::zeros(l.weight.dim()),
                bias_eg: Array1::zeros(l.bias.len()),
                bias_ed: Array1::zeros(l.bias.len()),
            })
            .collect();
        Ok(Self { cfg, layers })
    }

    pub fn config(&self) -> &AdaDeltaConfig {
        &self.cfg
    }

    /// Applies one update in place. Errors if the gradient layout does not
    /// match the net, or if any gradient or updated parameter is
    /// non-finite; on error the net is left unchanged.
    pub fn step(&mut self, net: &mut DenseNet, grads: &NetGrads) -> Result<(), EngineError> {
        if grads.layers.len() != self.layers.len() {
            return Err(EngineError::DimensionMismatch {
                context: "adadelta layer count",
                expected: self.layers.len(),
                actual: grads.layers.len(),
            });
        }
        for (acc, g) in self.layers.iter().zip(grads.layers.iter()) {
            if acc.weight_eg.dim() != g.weight.dim() || acc.bias_eg.len() != g.bias.len() {
                return Err(EngineError::DimensionMismatch {
                    context: "adadelta layer shape",
                    expected: acc.weight_eg.len(),
                    actual: g.weight.len(),
                });
            }
        }
        if !grads.is_finite() {
            return Err(EngineError::NonFinite("adadelta gradients"));
        }
        let cfg = self.cfg;
        let layer_count = self.layers.len();
        for li in 0..layer_count {
            let acc = &mut self.layers[li];
            let g = &grads.layers[li];
            // weights
            for ((idx, p), grad) in net.layer_weight_mut(li).indexed_iter_mut().zip(g.weight.iter())
            {
                let mut pair = (acc.weight_eg[idx], acc.weight_ed[idx]);
                *p += adadelta_scalar(*grad, &mut pair, &cfg);
                acc.weight_eg[idx] = pair.0;
                acc.weight_ed[idx] = pair.1;
            }
            // biases
            for ((idx, p), grad) in net.layer_bias_mut(li).indexed_iter_mut().zip(g.bias.iter()) {
                let mut pair = (acc.bias_eg[idx], acc.bias_ed[idx]);
                *p += adadelta_scalar(*grad, &mut pair, &cfg);
                acc.bias_eg[idx] = pair.0;
                acc.bias_ed[idx] = pair.1;
            }
        }
        net.check_finite()
    }
}
