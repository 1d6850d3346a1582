//! Dense networks, forward tapes, and backward passes.
//!
//! A [`DenseNet`] is an ordered list of affine maps `z = x W^T + b` with a
//! rectifier between consecutive layers. Heads leave the last layer linear
//! (a raw logit); encoders rectify their output so the representation fed
//! to downstream heads is the post-activation hidden state.
//!
//! The gradient-reversal primitives [`reversed_forward`] /
//! [`reversed_backward`] chain an encoder and a head with a cut between
//! them. On the way back the head is differentiated normally and every
//! encoder-side gradient is multiplied by `-lambda` at the end of the
//! pass, so reversal with scale `c` is bitwise `-c` times the pass with
//! the reversal replaced by identity. A scale of zero short-circuits: the
//! encoder side receives exactly zero.

use ndarray::{Array1, Array2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::Rng;

use super::EngineError;

/// One affine layer, weights stored as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// A stack of affine layers with rectifiers between them.
///
/// `rectified_output` controls whether the final layer is also rectified
/// (encoders) or left linear (logit heads).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    rectified_output: bool,
}

impl DenseNet {
    /// Seeded Glorot-uniform initialization: weights uniform in
    /// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`, biases zero.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        rectified_output: bool,
        rng: &mut R,
    ) -> Result<Self, EngineError> {
        Self::validate_dims(dims)?;
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new(-limit, limit)
                .map_err(|e| EngineError::BadArchitecture(e.to_string()))?;
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| dist.sample(rng));
            layers.push(Layer {
                weight,
                bias: Array1::zeros(fan_out),
            });
        }
        Ok(Self {
            layers,
            rectified_output,
        })
    }

    /// All-zero parameters, mostly useful in tests.
    pub fn zeros(dims: &[usize], rectified_output: bool) -> Result<Self, EngineError> {
        Self::validate_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                weight: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self {
            layers,
            rectified_output,
        })
    }

    /// Builds a net from explicit layers. Consecutive dimensions must chain.
    pub fn from_layers(layers: Vec<Layer>, rectified_output: bool) -> Result<Self, EngineError> {
        if layers.is_empty() {
            return Err(EngineError::BadArchitecture("no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(EngineError::BadArchitecture(format!(
                    "layer dims do not chain: {} -> {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self {
            layers,
            rectified_output,
        })
    }

    fn validate_dims(dims: &[usize]) -> Result<(), EngineError> {
        if dims.len() < 2 {
            return Err(EngineError::BadArchitecture(
                "need at least one layer".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(EngineError::BadArchitecture("zero-width layer".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_weight_mut(&mut self, idx: usize) -> &mut Array2<f64> {
        &mut self.layers[idx].weight
    }

    pub fn layer_bias_mut(&mut self, idx: usize) -> &mut Array1<f64> {
        &mut self.layers[idx].bias
    }

    pub fn rectified_output(&self) -> bool {
        self.rectified_output
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Returns an error if any parameter is non-finite.
    pub fn check_finite(&self) -> Result<(), EngineError> {
        for l in &self.layers {
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(EngineError::NonFinite("network parameters"));
            }
        }
        Ok(())
    }

    /// Flattens all parameters, layer by layer, weights then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Restores parameters from a flat vector produced by [`Self::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), EngineError> {
        if flat.len() != self.param_count() {
            return Err(EngineError::DimensionMismatch {
                context: "set_params_flat",
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = *it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Forward pass recording a tape for backward.
    ///
    /// Input is `n x input_dim`; output is `n x output_dim`. Errors on a
    /// column-count mismatch or any non-finite input or activation.
    pub fn forward(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, Tape), EngineError> {
        if batch.ncols() != self.input_dim() {
            return Err(EngineError::DimensionMismatch {
                context: "forward input columns",
                expected: self.input_dim(),
                actual: batch.ncols(),
            });
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::NonFinite("forward input"));
        }
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut preacts = Vec::with_capacity(n_layers);
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = x.dot(&layer.weight.t()) + &layer.bias;
            inputs.push(x);
            let activated = i + 1 < n_layers || self.rectified_output;
            x = if activated {
                z.mapv(|v| if v > 0.0 { v } else { 0.0 })
            } else {
                z.clone()
            };
            preacts.push(z);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::NonFinite("forward output"));
        }
        Ok((x, Tape { inputs, preacts }))
    }

    /// Forward pass without a tape, for inference.
    pub fn infer(&self, batch: &Array2<f64>) -> Result<Array2<f64>, EngineError> {
        self.forward(batch).map(|(out, _)| out)
    }

    /// Backward pass. Consumes the tape recorded by [`Self::forward`] and
    /// returns parameter gradients along with the gradient w.r.t. the
    /// batch input.
    ///
    /// `out_grad` is `dL/d(output)`, shape `n x output_dim`; it should
    /// already carry any `1/n` batch-mean factor so the result is the
    /// gradient of the scalar batch loss.
    pub fn backward(
        &self,
        tape: Tape,
        out_grad: &Array2<f64>,
    ) -> Result<(NetGrads, Array2<f64>), EngineError> {
        let n_layers = self.layers.len();
        if tape.inputs.len() != n_layers {
            return Err(EngineError::DimensionMismatch {
                context: "tape layer count",
                expected: n_layers,
                actual: tape.inputs.len(),
            });
        }
        if out_grad.ncols() != self.output_dim() || out_grad.nrows() != tape.inputs[0].nrows() {
            return Err(EngineError::DimensionMismatch {
                context: "backward out_grad shape",
                expected: self.output_dim(),
                actual: out_grad.ncols(),
            });
        }
        let Tape { inputs, preacts } = tape;
        let mut layer_grads = vec![
            LayerGrads {
                weight: Array2::zeros((0, 0)),
                bias: Array1::zeros(0),
            };
            n_layers
        ];
        let mut upstream = out_grad.clone();
        for i in (0..n_layers).rev() {
            let activated = i + 1 < n_layers || self.rectified_output;
            let dz = if activated {
                let mut dz = upstream;
                dz.zip_mut_with(&preacts[i], |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                dz
            } else {
                upstream
            };
            layer_grads[i] = LayerGrads {
                weight: dz.t().dot(&inputs[i]),
                bias: dz.sum_axis(Axis(0)),
            };
            upstream = dz.dot(&self.layers[i].weight);
        }
        Ok((
            NetGrads {
                layers: layer_grads,
            },
            upstream,
        ))
    }
}

/// Recorded intermediates for one forward pass of one minibatch.
///
/// Consuming semantics: `backward` takes the tape by value, so a tape is
/// used at most once.
#[derive(Debug)]
pub struct Tape {
    inputs: Vec<Array2<f64>>,
    preacts: Vec<Array2<f64>>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Per-layer parameter gradients.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients for every parameter of a [`DenseNet`], in layer order.
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub layers: Vec<LayerGrads>,
}

impl NetGrads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        NetGrads {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGrads {
                    weight: Array2::zeros(l.weight.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn scale_mut(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weight.mapv_inplace(|g| c * g);
            l.bias.mapv_inplace(|g| c * g);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Flattens in the same order as [`DenseNet::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }
}

/// Tape for an encoder/head pair joined by a reversal cut.
#[derive(Debug)]
pub struct ReversedTape {
    encoder: Tape,
    head: Tape,
    lambda: f64,
}

/// Gradients on both sides of a reversal cut.
#[derive(Debug)]
pub struct ReversedGrads {
    pub encoder: NetGrads,
    pub head: NetGrads,
}

/// Runs `head(encoder(batch))` recording tapes on both sides of the cut.
///
/// `lambda` is the reversal scale applied to encoder-side gradients during
/// [`reversed_backward`]; it must be nonnegative and finite.
pub fn reversed_forward(
    encoder: &DenseNet,
    head: &DenseNet,
    batch: &Array2<f64>,
    lambda: f64,
) -> Result<(Array2<f64>, ReversedTape), EngineError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(EngineError::BadHyperparameter(format!(
            "reversal scale must be finite and >= 0, got {lambda}"
        )));
    }
    let (hidden, enc_tape) = encoder.forward(batch)?;
    let (out, head_tape) = head.forward(&hidden)?;
    Ok((
        out,
        ReversedTape {
            encoder: enc_tape,
            head: head_tape,
            lambda,
        },
    ))
}

/// Backward through a reversal cut.
///
/// The head side is differentiated normally. The encoder side is run with
/// the unscaled cut gradient and every encoder parameter gradient is then
/// multiplied by `-lambda`, so the result is bitwise `-lambda` times the
/// identity-cut pass. `lambda == 0` skips the encoder pass entirely and
/// returns exact zeros.
pub fn reversed_backward(
    encoder: &DenseNet,
    head: &DenseNet,
    tape: ReversedTape,
    out_grad: &Array2<f64>,
) -> Result<ReversedGrads, EngineError> {
    let ReversedTape {
        encoder: enc_tape,
        head: head_tape,
        lambda,
    } = tape;
    let (head_grads, cut_grad) = head.backward(head_tape, out_grad)?;
    let encoder_grads = if lambda == 0.0 {
        NetGrads::zeros_like(encoder)
    } else {
        let (mut g, _) = encoder.backward(enc_tape, &cut_grad)?;
        g.scale_mut(-lambda);
        g
    };
    Ok(ReversedGrads {
        encoder: encoder_grads,
        head: head_grads,
    })
}
