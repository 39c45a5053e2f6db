//! Dense feed-forward network with explicit backprop.
//!
//! Parameters live in one flat `Vec<f64>` (per layer: row-major weights,
//! then biases) so the optimizer can treat the whole network as a single
//! parameter vector. Serialization keeps that layout: a `sizes` header
//! plus the flat row-major parameter array.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Hidden-layer nonlinearity. The output layer is always identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in terms of the post-activation value.
    #[inline]
    fn deriv_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Activations recorded by [`Mlp::forward_trace`], consumed by
/// [`Mlp::backward`]. `acts[0]` is the input, `acts[l+1]` the output of
/// layer `l` (post-nonlinearity for hidden layers).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub acts: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least the input")
    }
}

/// Multi-layer perceptron over flat `f64` parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    params: Vec<f64>,
}

impl Mlp {
    /// Network with weights drawn uniformly from ±1/sqrt(fan_in) and zero
    /// biases.
    pub fn new(sizes: &[usize], hidden: Activation, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(sizes, hidden);
        let mut off = 0;
        for l in 0..net.layer_count() {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in &mut net.params[off..off + fan_in * fan_out] {
                *w = rng.gen_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    /// All-zero network (useful as a deterministic baseline).
    pub fn zeros(sizes: &[usize], hidden: Activation) -> Self {
        assert!(sizes.len() >= 2, "need at least an input and output layer");
        assert!(sizes.iter().all(|&s| s > 0), "layer widths must be positive");
        let n: usize = (0..sizes.len() - 1)
            .map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1])
            .sum();
        Mlp {
            sizes: sizes.to_vec(),
            hidden,
            params: vec![0.0; n],
        }
    }

    /// Convenience constructor: `hidden_layers` hidden layers of a common
    /// width between `input` and `output`.
    pub fn with_shape(
        input: usize,
        hidden_layers: usize,
        width: usize,
        output: usize,
        hidden: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let mut sizes = Vec::with_capacity(hidden_layers + 2);
        sizes.push(input);
        sizes.extend(std::iter::repeat(width).take(hidden_layers));
        sizes.push(output);
        Self::new(&sizes, hidden, rng)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offset of layer `l`'s weight block in the flat parameter vector.
    fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| self.sizes[k] * self.sizes[k + 1] + self.sizes[k + 1])
            .sum()
    }

    /// Set one full layer; row-major `weights` is `out x in`.
    pub fn set_layer(&mut self, l: usize, weights: &[f64], biases: &[f64]) {
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        assert_eq!(weights.len(), fan_in * fan_out, "weight block size");
        assert_eq!(biases.len(), fan_out, "bias block size");
        let off = self.layer_offset(l);
        self.params[off..off + weights.len()].copy_from_slice(weights);
        self.params[off + weights.len()..off + weights.len() + fan_out].copy_from_slice(biases);
    }

    /// Forward pass. Panics if `x` does not match the input width.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).acts.pop().unwrap()
    }

    /// Forward pass keeping every layer's activations for backprop.
    pub fn forward_trace(&self, x: &[f64]) -> ForwardTrace {
        assert_eq!(x.len(), self.sizes[0], "input width mismatch");
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..self.layer_count() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let last = l + 1 == self.layer_count();
            let prev = &acts[l];
            let mut out = Vec::with_capacity(fan_out);
            for o in 0..fan_out {
                let row = &self.params[off + o * fan_in..off + (o + 1) * fan_in];
                let mut z = self.params[off + fan_in * fan_out + o];
                for (w, a) in row.iter().zip(prev.iter()) {
                    z += w * a;
                }
                out.push(if last { z } else { self.hidden.apply(z) });
            }
            off += fan_in * fan_out + fan_out;
            acts.push(out);
        }
        ForwardTrace { acts }
    }

    /// Backprop `upstream` (dL/dy) through the traced forward pass.
    ///
    /// Accumulates parameter gradients into `grads` (same layout and
    /// length as [`Mlp::params`]) and returns dL/dx.
    pub fn backward(&self, trace: &ForwardTrace, upstream: &[f64], grads: &mut [f64]) -> Vec<f64> {
        assert_eq!(upstream.len(), self.output_dim(), "upstream width mismatch");
        assert_eq!(grads.len(), self.params.len(), "gradient buffer size");
        let mut delta = upstream.to_vec();
        let mut off = self.params.len();
        for l in (0..self.layer_count()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            off -= fan_in * fan_out + fan_out;
            let prev = &trace.acts[l];
            let mut delta_prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                let w_row = &self.params[off + o * fan_in..off + (o + 1) * fan_in];
                let g_row = &mut grads[off + o * fan_in..off + (o + 1) * fan_in];
                for i in 0..fan_in {
                    g_row[i] += d * prev[i];
                    delta_prev[i] += w_row[i] * d;
                }
                grads[off + fan_in * fan_out + o] += d;
            }
            if l > 0 {
                // prev is a hidden activation; fold in its nonlinearity.
                for (dp, a) in delta_prev.iter_mut().zip(prev.iter()) {
                    *dp *= self.hidden.deriv_from_output(*a);
                }
            }
            delta = delta_prev;
        }
        delta
    }

    /// Serialize to the checkpoint JSON format (sizes header + flat
    /// row-major parameters).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mlp serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let net: Mlp = serde_json::from_str(s)?;
        let expected = Self::zeros(&net.sizes, net.hidden).params.len();
        if net.params.len() != expected {
            use serde::de::Error as _;
            return Err(serde_json::Error::custom(format!(
                "parameter count {} does not match sizes header (expected {expected})",
                net.params.len()
            )));
        }
        Ok(net)
    }
}
