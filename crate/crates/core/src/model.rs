//! Feed-forward binary scorer with a flat parameter vector.
//!
//! The model is a small dense network: rectified-linear hidden layers and a
//! single identity-activation output unit whose value is the logit. A positive
//! logit means a positive prediction. The penultimate activation (the last
//! hidden layer, post-rectifier) doubles as the feature vector used by the
//! consistency losses.
//!
//! Parameters live in one flat `Vec<f64>` so that optimizer steps and weight
//! transfer are plain vector arithmetic. Layout per layer: weights row-major
//! `(out, in)`, then biases.

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Cached per-layer values from one forward pass, consumed by backprop.
pub struct ForwardTrace {
    input: Vec<f64>,
    /// Pre-activation z per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation a per layer; last entry is `[logit]`.
    post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn logit(&self) -> f64 {
        self.post.last().expect("trace has layers")[0]
    }

    /// Last hidden activation (the feature vector), when hidden layers exist.
    pub fn features(&self) -> Option<&[f64]> {
        let n = self.post.len();
        if n >= 2 {
            Some(&self.post[n - 2])
        } else {
            None
        }
    }
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes
        .windows(2)
        .map(|w| (w[0] + 1) * w[1])
        .sum()
}

impl Model {
    /// Zero-initialized model. `layer_sizes` runs input dim -> hidden dims -> 1.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "model needs at least input and output layers".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("output layer must have size 1".into()));
        }
        Ok(Model {
            params: vec![0.0; param_count(layer_sizes)],
            layer_sizes: layer_sizes.to_vec(),
        })
    }

    /// Seeded init, uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
    pub fn init(layer_sizes: &[usize], rng: &mut StreamRng) -> Result<Self> {
        let mut model = Model::zeros(layer_sizes)?;
        let mut offset = 0;
        for w in model.layer_sizes.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut model.params[offset..offset + (fan_in + 1) * fan_out] {
                *p = rng.uniform(-bound, bound);
            }
            offset += (fan_in + 1) * fan_out;
        }
        Ok(model)
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut model = Model::zeros(layer_sizes)?;
        if params.len() != model.params.len() {
            return Err(Error::DimensionMismatch {
                expected: model.params.len(),
                got: params.len(),
            });
        }
        model.params = params;
        Ok(model)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn feature_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    pub fn hidden_layer_count(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Full forward pass with cached activations.
    pub fn trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let n_layers = self.layer_sizes.len() - 1;
        let mut pre = Vec::with_capacity(n_layers);
        let mut post = Vec::with_capacity(n_layers);
        let mut offset = 0;
        let mut activation: Vec<f64> = x.to_vec();
        for (layer, w) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases = &self.params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            let mut z = vec![0.0; fan_out];
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &weights[i * fan_in..(i + 1) * fan_in];
                let mut acc = biases[i];
                for (wj, aj) in row.iter().zip(activation.iter()) {
                    acc += wj * aj;
                }
                *zi = acc;
            }
            let is_output = layer == n_layers - 1;
            let a: Vec<f64> = if is_output {
                z.clone()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
            activation = a.clone();
            post.push(a);
            offset += (fan_in + 1) * fan_out;
        }
        Ok(ForwardTrace {
            input: x.to_vec(),
            pre,
            post,
        })
    }

    /// Logit g(x).
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.trace(x)?.logit())
    }

    /// Feature vector: last hidden activation, entrywise nonnegative.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.hidden_layer_count() == 0 {
            return Err(Error::NoHiddenLayer);
        }
        let trace = self.trace(x)?;
        Ok(trace.features().expect("hidden layer checked").to_vec())
    }

    /// Backpropagate output-side gradients through a cached trace,
    /// accumulating d(loss)/d(theta) into `grad`.
    ///
    /// `d_logit` is the loss gradient w.r.t. the output logit; `d_features`,
    /// when present, is the loss gradient w.r.t. the last hidden activation
    /// (it is injected before the rectifier derivative of that layer).
    pub fn backprop(
        &self,
        trace: &ForwardTrace,
        d_logit: f64,
        d_features: Option<&[f64]>,
        grad: &mut [f64],
    ) {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer size");
        let n_layers = self.layer_sizes.len() - 1;
        // Offsets of each layer's parameter block.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in self.layer_sizes.windows(2) {
            offsets.push(offset);
            offset += (w[0] + 1) * w[1];
        }

        // delta = dL/dz for the current layer, walking backwards.
        let mut delta = vec![d_logit];
        for layer in (0..n_layers).rev() {
            let fan_in = self.layer_sizes[layer];
            let fan_out = self.layer_sizes[layer + 1];
            let off = offsets[layer];
            let prev_activation: &[f64] = if layer == 0 {
                &trace.input
            } else {
                &trace.post[layer - 1]
            };
            // Parameter gradients for this layer.
            for i in 0..fan_out {
                let gw = &mut grad[off + i * fan_in..off + (i + 1) * fan_in];
                for (g, a) in gw.iter_mut().zip(prev_activation.iter()) {
                    *g += delta[i] * a;
                }
                grad[off + fan_in * fan_out + i] += delta[i];
            }
            if layer == 0 {
                break;
            }
            // dL/d(post-activation) of the previous layer.
            let weights = &self.params[off..off + fan_in * fan_out];
            let mut d_post = vec![0.0; fan_in];
            for (i, &d) in delta.iter().enumerate() {
                let row = &weights[i * fan_in..(i + 1) * fan_in];
                for (dp, w) in d_post.iter_mut().zip(row.iter()) {
                    *dp += d * w;
                }
            }
            // Feature-level gradients enter at the last hidden layer.
            if layer == n_layers - 1 {
                if let Some(df) = d_features {
                    assert_eq!(df.len(), fan_in, "feature gradient size");
                    for (dp, d) in d_post.iter_mut().zip(df.iter()) {
                        *dp += d;
                    }
                }
            }
            // Through the rectifier of the previous (hidden) layer.
            let z_prev = &trace.pre[layer - 1];
            delta = d_post
                .iter()
                .zip(z_prev.iter())
                .map(|(&dp, &z)| if z > 0.0 { dp } else { 0.0 })
                .collect();
        }
    }
}
