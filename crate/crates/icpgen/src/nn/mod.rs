//! Dense feed-forward network with bipolar SELU hidden units, manual
//! backpropagation, and Adam.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::batch::SampleBatch;
use crate::{Error, Result};

pub mod activation;
mod adam;
mod checkpoint;

pub use activation::{bipolar_selu, clip_output_gradient, selu};
pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;

pub const HIDDEN_ACTIVATION_TAG: &str = "bipolar-selu";
pub const OUTPUT_ACTIVATION_TAG: &str = "linear";

/// A fully connected network. Hidden layers apply the bipolar SELU, the
/// output layer is linear. Weight matrices are stored row-major with shape
/// `(in_dim, out_dim)`: `w[i * out_dim + o]` connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Per-layer values retained by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    /// Input batch of every layer: activations a_0 (the network input)
    /// through a_{L-1}.
    layer_inputs: Vec<SampleBatch>,
    /// Pre-activation batches of the hidden layers only; the output layer is
    /// linear so its pre-activation is the returned output itself.
    hidden_pre: Vec<SampleBatch>,
}

/// Loss gradients for every weight and bias, shapes mirroring the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weight_grads: Vec<Vec<f64>>,
    pub bias_grads: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        GradientSet {
            weight_grads: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            bias_grads: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn congruent_with(&self, net: &DenseNetwork) -> bool {
        self.weight_grads.len() == net.weights.len()
            && self.bias_grads.len() == net.biases.len()
            && self
                .weight_grads
                .iter()
                .zip(&net.weights)
                .all(|(g, w)| g.len() == w.len())
            && self
                .bias_grads
                .iter()
                .zip(&net.biases)
                .all(|(g, b)| g.len() == b.len())
    }
}

/// Weights drawn from Normal(0, 1/fan_in), biases zero, deterministic for a
/// fixed seed.
pub fn init_network(layer_dims: &[usize], seed: u64) -> Result<DenseNetwork> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidConfig(
            "a network needs at least an input and an output dimension".into(),
        ));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidConfig("all layer dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for gap in layer_dims.windows(2) {
        let (n_in, n_out) = (gap[0], gap[1]);
        let dist = Normal::new(0.0, (1.0 / n_in as f64).sqrt()).expect("finite std");
        let w: Vec<f64> = (0..n_in * n_out).map(|_| dist.sample(&mut rng)).collect();
        weights.push(w);
        biases.push(vec![0.0; n_out]);
    }
    Ok(DenseNetwork {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

impl DenseNetwork {
    /// Builds a network from explicit parameters, validating shapes.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("invalid layer dimensions".into()));
        }
        let gaps = layer_dims.len() - 1;
        if weights.len() != gaps || biases.len() != gaps {
            return Err(Error::DimensionMismatch(format!(
                "{} layer gaps but {} weight matrices and {} bias vectors",
                gaps,
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..gaps {
            if weights[l].len() != layer_dims[l] * layer_dims[l + 1] {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} weights have {} entries, expected {}x{}",
                    l,
                    weights[l].len(),
                    layer_dims[l],
                    layer_dims[l + 1]
                )));
            }
            if biases[l].len() != layer_dims[l + 1] {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} biases have {} entries, expected {}",
                    l,
                    biases[l].len(),
                    layer_dims[l + 1]
                )));
            }
        }
        Ok(DenseNetwork {
            layer_dims,
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Number of weight layers (layer gaps).
    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    /// Mutable parameter access, for optimizers and gradient checks.
    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    fn check_input(&self, inputs: &SampleBatch) -> Result<()> {
        if inputs.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "network expects inputs of dim {}, got {}",
                self.input_dim(),
                inputs.dim()
            )));
        }
        Ok(())
    }

    /// Affine step of one layer over a whole batch, rows in parallel.
    fn affine(&self, layer: usize, inputs: &SampleBatch) -> SampleBatch {
        let n_in = self.layer_dims[layer];
        let n_out = self.layer_dims[layer + 1];
        let w = &self.weights[layer];
        let b = &self.biases[layer];
        let mut out = SampleBatch::zeros(inputs.count(), n_out);
        out.as_flat_mut()
            .par_chunks_mut(n_out)
            .enumerate()
            .for_each(|(r, row)| {
                let x = inputs.row(r);
                row.copy_from_slice(b);
                for (i, &xi) in x.iter().enumerate().take(n_in) {
                    let wrow = &w[i * n_out..(i + 1) * n_out];
                    for (o, &wio) in wrow.iter().enumerate() {
                        row[o] += xi * wio;
                    }
                }
            });
        out
    }

    /// Maps a batch and keeps the per-layer values needed for `backward`.
    pub fn forward(&self, inputs: &SampleBatch) -> Result<(SampleBatch, ActivationCache)> {
        self.check_input(inputs)?;
        let layers = self.num_layers();
        let mut layer_inputs = Vec::with_capacity(layers);
        let mut hidden_pre = Vec::with_capacity(layers.saturating_sub(1));
        let mut current = inputs.clone();
        for l in 0..layers {
            let pre = self.affine(l, &current);
            layer_inputs.push(current);
            if l + 1 < layers {
                let mut act = pre.clone();
                for r in 0..act.count() {
                    let row = act.row_mut(r);
                    for (i, v) in row.iter_mut().enumerate() {
                        *v = activation::bipolar_selu_unit(*v, i);
                    }
                }
                hidden_pre.push(pre);
                current = act;
            } else {
                current = pre;
            }
        }
        Ok((
            current,
            ActivationCache {
                layer_inputs,
                hidden_pre,
            },
        ))
    }

    /// Maps a batch without caching.
    pub fn predict(&self, inputs: &SampleBatch) -> Result<SampleBatch> {
        self.check_input(inputs)?;
        let layers = self.num_layers();
        let mut current = inputs.clone();
        for l in 0..layers {
            let mut pre = self.affine(l, &current);
            if l + 1 < layers {
                for r in 0..pre.count() {
                    let row = pre.row_mut(r);
                    for (i, v) in row.iter_mut().enumerate() {
                        *v = activation::bipolar_selu_unit(*v, i);
                    }
                }
            }
            current = pre;
        }
        Ok(current)
    }

    /// Backpropagates a per-row loss gradient `dL/d(output)` through the
    /// cached forward pass. Per-example gradients are summed and divided by
    /// the batch size.
    pub fn backward(
        &self,
        cache: &ActivationCache,
        output_gradient: &SampleBatch,
    ) -> Result<GradientSet> {
        let layers = self.num_layers();
        if cache.layer_inputs.len() != layers || cache.hidden_pre.len() + 1 != layers {
            return Err(Error::DimensionMismatch(
                "activation cache does not belong to this network".into(),
            ));
        }
        if output_gradient.dim() != self.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "output gradient dim {} != network output dim {}",
                output_gradient.dim(),
                self.output_dim()
            )));
        }
        let batch = output_gradient.count();
        if cache.layer_inputs[0].count() != batch {
            return Err(Error::DimensionMismatch(format!(
                "cache holds {} rows, output gradient {}",
                cache.layer_inputs[0].count(),
                batch
            )));
        }

        let mut grads = GradientSet::zeros_like(self);
        for r in 0..batch {
            let mut delta = output_gradient.row(r).to_vec();
            for l in (0..layers).rev() {
                let n_out = self.layer_dims[l + 1];
                let x = cache.layer_inputs[l].row(r);
                let gw = &mut grads.weight_grads[l];
                for (i, &xi) in x.iter().enumerate() {
                    let grow = &mut gw[i * n_out..(i + 1) * n_out];
                    for (o, g) in grow.iter_mut().enumerate() {
                        *g += xi * delta[o];
                    }
                }
                for (o, g) in grads.bias_grads[l].iter_mut().enumerate() {
                    *g += delta[o];
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let pre = cache.hidden_pre[l - 1].row(r);
                    let mut prev = vec![0.0; self.layer_dims[l]];
                    for (i, p) in prev.iter_mut().enumerate() {
                        let wrow = &w[i * n_out..(i + 1) * n_out];
                        let mut acc = 0.0;
                        for (o, &wio) in wrow.iter().enumerate() {
                            acc += wio * delta[o];
                        }
                        *p = acc * activation::bipolar_selu_unit_derivative(pre[i], i);
                    }
                    delta = prev;
                }
            }
        }
        let scale = 1.0 / batch as f64;
        for g in grads.weight_grads.iter_mut().flatten() {
            *g *= scale;
        }
        for g in grads.bias_grads.iter_mut().flatten() {
            *g *= scale;
        }
        Ok(grads)
    }
}
