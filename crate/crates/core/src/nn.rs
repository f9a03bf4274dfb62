//! Multilayer perceptrons with explicit forward and backward passes.
//!
//! Parameters live in one flat [`ParameterVector`]. Layers are stored in
//! order, each as its weight matrix followed by its bias:
//!
//! ```text
//! [ W1 (fan_out x fan_in, row-major) | b1 | W2 | b2 | ... | WL | bL ]
//! ```
//!
//! Hidden layers apply the spec's activation; the output layer is linear.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::tensor::{ParameterVector, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `h`.
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

/// Architecture of a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerLayout {
    pub fn end(&self) -> usize {
        self.bias_offset + self.fan_out
    }
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "all layer widths must be at least 1: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerLayout> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);

        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let layout = LayerLayout {
                    fan_in,
                    fan_out,
                    weight_offset: offset,
                    bias_offset: offset + fan_in * fan_out,
                };
                offset = layout.end();
                layout
            })
            .collect()
    }

    /// Σ (fan_in + 1) · fan_out over all layers.
    pub fn param_count(&self) -> usize {
        self.layers().last().map_or(0, LayerLayout::end)
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Network parameters. Every mutation through [`MlpParams::theta_mut`]
/// invalidates forward caches taken before it.
#[derive(Debug, Clone)]
pub struct MlpParams {
    spec: MlpSpec,
    theta: ParameterVector,
    stamp: u64,
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.theta == other.theta
    }
}

/// Activations saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    stamp: u64,
    /// Input of every layer: the network input, then each hidden output.
    layer_inputs: Vec<Tensor2>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.layer_inputs[0].rows()
    }
}

impl MlpParams {
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.param_count();
        Ok(Self {
            spec,
            theta: ParameterVector::zeros(n),
            stamp: fresh_stamp(),
        })
    }

    /// Weights uniform in ±1/√fan_in, biases zero.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        for layer in params.spec.layers() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for w in &mut params.theta[layer.weight_offset..layer.bias_offset] {
                *w = dist.sample(rng);
            }
        }
        Ok(params)
    }

    pub fn unflatten(spec: MlpSpec, theta: ParameterVector) -> Result<Self> {
        spec.validate()?;
        check_dim("flat parameter vector", spec.param_count(), theta.len())?;
        Ok(Self {
            spec,
            theta,
            stamp: fresh_stamp(),
        })
    }

    pub fn flatten(&self) -> ParameterVector {
        self.theta.clone()
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn theta(&self) -> &ParameterVector {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut ParameterVector {
        self.stamp = fresh_stamp();
        &mut self.theta
    }

    pub fn set_theta(&mut self, theta: ParameterVector) -> Result<()> {
        check_dim("flat parameter vector", self.theta.len(), theta.len())?;
        self.theta = theta;
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.spec.input_dim, input.len())?;
        let mut x = input.to_vec();
        let layers = self.spec.layers();
        let last = layers.len() - 1;
        for (l, layer) in layers.iter().enumerate() {
            let w = &self.theta[layer.weight_offset..layer.bias_offset];
            let b = &self.theta[layer.bias_offset..layer.end()];
            let mut out: Vec<f64> = w
                .chunks_exact(layer.fan_in)
                .zip(b)
                .map(|(row, bias)| bias + dot(row, &x))
                .collect();
            if l < last {
                out.iter_mut()
                    .for_each(|v| *v = self.spec.activation.apply(*v));
            }
            x = out;
        }
        ensure_finite(&x)?;
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        check_dim("network input", self.spec.input_dim, input.len())?;
        let x = Tensor2::from_vec(1, input.len(), input.to_vec())?;
        let (out, cache) = self.forward_batch(&x)?;
        Ok((out.into_data(), cache))
    }

    /// Forward pass over a batch laid out one sample per row.
    pub fn forward_batch(&self, input: &Tensor2) -> Result<(Tensor2, ForwardCache)> {
        check_dim("network input", self.spec.input_dim, input.cols())?;
        let layers = self.spec.layers();
        let last = layers.len() - 1;
        let batch = input.rows();
        let mut layer_inputs = Vec::with_capacity(layers.len());
        let mut x = input.clone();
        for (l, layer) in layers.iter().enumerate() {
            let w = &self.theta[layer.weight_offset..layer.bias_offset];
            let b = &self.theta[layer.bias_offset..layer.end()];
            let mut out = Tensor2::zeros(batch, layer.fan_out);
            for r in 0..batch {
                let xr = x.row(r);
                for ((o, row), bias) in out.row_mut(r).iter_mut().zip(w.chunks_exact(layer.fan_in)).zip(b) {
                    let z = bias + dot(row, xr);
                    *o = if l < last {
                        self.spec.activation.apply(z)
                    } else {
                        z
                    };
                }
            }
            layer_inputs.push(x);
            x = out;
        }
        ensure_finite(x.data())?;
        Ok((
            x,
            ForwardCache {
                stamp: self.stamp,
                layer_inputs,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
    ) -> Result<(ParameterVector, Vec<f64>)> {
        check_dim("output gradient", self.spec.output_dim, output_grad.len())?;
        let g = Tensor2::from_vec(1, output_grad.len(), output_grad.to_vec())?;
        let (grad, input_grad) = self.backward_batch(cache, &g)?;
        Ok((grad, input_grad.into_data()))
    }

    /// Backward pass for a batch. Parameter gradients are summed over rows;
    /// input gradients are returned per row.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        output_grad: &Tensor2,
    ) -> Result<(ParameterVector, Tensor2)> {
        if cache.stamp != self.stamp {
            return Err(Error::ContractViolation(
                "forward cache does not belong to these parameters (stale or foreign)".into(),
            ));
        }
        let layers = self.spec.layers();
        if cache.layer_inputs.len() != layers.len() {
            return Err(Error::ContractViolation(
                "forward cache depth does not match network depth".into(),
            ));
        }
        check_dim("output gradient", self.spec.output_dim, output_grad.cols())?;
        check_dim("output gradient batch", cache.batch_size(), output_grad.rows())?;

        let batch = output_grad.rows();
        let mut grad = ParameterVector::zeros(self.theta.len());
        let mut delta = output_grad.clone();
        for (l, layer) in layers.iter().enumerate().rev() {
            let x = &cache.layer_inputs[l];
            let w = &self.theta[layer.weight_offset..layer.bias_offset];
            let mut dx = Tensor2::zeros(batch, layer.fan_in);
            {
                let (gw, gb) = grad[layer.weight_offset..layer.end()].split_at_mut(layer.fan_in * layer.fan_out);
                for r in 0..batch {
                    let dr = delta.row(r);
                    let xr = x.row(r);
                    let dxr = dx.row_mut(r);
                    for (o, &d) in dr.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        axpy(d, xr, &mut gw[o * layer.fan_in..(o + 1) * layer.fan_in]);
                        axpy(d, &w[o * layer.fan_in..(o + 1) * layer.fan_in], dxr);
                    }
                }
            }
            if l > 0 {
                // x is the output of hidden layer l-1
                for (d, &h) in dx.data_mut().iter_mut().zip(x.data()) {
                    *d *= self.spec.activation.derivative_from_output(h);
                }
            }
            delta = dx;
        }
        Ok((grad, delta))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn ensure_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::ContractViolation(
            "network produced a non-finite value".into(),
        ))
    }
}
