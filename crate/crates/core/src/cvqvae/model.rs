use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ScenarioTensor, InteractionMatrix, N_CLASSES, N_SLOTS, T_OBS};

/// Fully connected layer `y = x W^T + b` with `W` of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((outputs, inputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = (6.0 / (inputs + outputs).max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
        Self {
            w: Array2::from_shape_simple_fn((outputs, inputs), || dist.sample(rng)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }
}

/// Layer sizes of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub codebook_size: usize,
    pub n_classes: usize,
    pub interaction_dim: usize,
}

impl ModelDims {
    /// Dimensions for scenario tensors.
    pub fn scenario(hidden: Vec<usize>, latent_dim: usize, codebook_size: usize) -> Self {
        Self {
            input_dim: ScenarioTensor::LEN,
            hidden,
            latent_dim,
            codebook_size,
            n_classes: N_CLASSES,
            interaction_dim: InteractionMatrix::LEN,
        }
    }
}

/// Architecture knobs shared by the CLI and library callers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub codebook_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            latent_dim: 64,
            codebook_size: 64,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.codebook_size == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(
                "model: latent_dim, codebook_size and hidden widths must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Trainable weights. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub encoder: Vec<Dense>,
    pub decoder: Vec<Dense>,
    pub codebook: Array2<f64>,
    pub cl_head: Dense,
    pub int_head: Dense,
}

impl Weights {
    pub fn zeros(dims: &ModelDims) -> Self {
        let enc = layer_sizes(dims);
        let dec: Vec<usize> = enc.iter().rev().copied().collect();
        Self {
            encoder: enc.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            decoder: dec.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            codebook: Array2::zeros((dims.codebook_size, dims.latent_dim)),
            cl_head: Dense::zeros(dims.latent_dim, dims.n_classes),
            int_head: Dense::zeros(dims.latent_dim, dims.interaction_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |d: &Dense| Dense::zeros(d.inputs(), d.outputs());
        Self {
            encoder: self.encoder.iter().map(z).collect(),
            decoder: self.decoder.iter().map(z).collect(),
            codebook: Array2::zeros(self.codebook.raw_dim()),
            cl_head: z(&self.cl_head),
            int_head: z(&self.int_head),
        }
    }

    /// Parameter tensors in checkpoint order, with names.
    pub fn named(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (i, d) in self.encoder.iter().enumerate() {
            push_dense(&mut out, format!("encoder.{i}"), d);
        }
        for (i, d) in self.decoder.iter().enumerate() {
            push_dense(&mut out, format!("decoder.{i}"), d);
        }
        out.push(("codebook".into(), slice(&self.codebook)));
        push_dense(&mut out, "cl_head".into(), &self.cl_head);
        push_dense(&mut out, "int_head".into(), &self.int_head);
        out
    }

    /// Mutable parameter tensors in the order of [`Weights::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.push(d.w.as_slice_mut().expect("contiguous"));
            out.push(d.b.as_slice_mut().expect("contiguous"));
        }
        out.push(self.codebook.as_slice_mut().expect("contiguous"));
        for d in [&mut self.cl_head, &mut self.int_head] {
            out.push(d.w.as_slice_mut().expect("contiguous"));
            out.push(d.b.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

fn push_dense<'a>(out: &mut Vec<(String, &'a [f64])>, name: String, d: &'a Dense) {
    out.push((format!("{name}.w"), slice(&d.w)));
    out.push((format!("{name}.b"), d.b.as_slice().expect("contiguous")));
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

fn layer_sizes(dims: &ModelDims) -> Vec<usize> {
    let mut sizes = vec![dims.input_dim];
    sizes.extend(&dims.hidden);
    sizes.push(dims.latent_dim);
    sizes
}

/// A complete model: weights, codebook usage statistics and the fixed
/// per-input scaling applied before the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub weights: Weights,
    pub usage: Array1<f64>,
    pub input_scale: Array1<f64>,
}

impl ModelParams {
    /// Glorot-initialized layers and heads, codebook drawn from a small
    /// Gaussian, unit input scale.
    pub fn init(dims: ModelDims, rng: &mut ChaCha8Rng) -> Self {
        let enc = layer_sizes(&dims);
        let dec: Vec<usize> = enc.iter().rev().copied().collect();
        let encoder = enc.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        let decoder = dec.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        let codebook = Array2::from_shape_simple_fn((dims.codebook_size, dims.latent_dim), || {
            0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let cl_head = Dense::glorot(dims.latent_dim, dims.n_classes, rng);
        let int_head = Dense::glorot(dims.latent_dim, dims.interaction_dim, rng);
        Self {
            usage: Array1::from_elem(dims.codebook_size, 1.0 / dims.codebook_size as f64),
            input_scale: Array1::ones(dims.input_dim),
            weights: Weights {
                encoder,
                decoder,
                codebook,
                cl_head,
                int_head,
            },
            dims,
        }
    }

    /// All-zero weights with unit input scale.
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            weights: Weights::zeros(&dims),
            usage: Array1::zeros(dims.codebook_size),
            input_scale: Array1::ones(dims.input_dim),
            dims,
        }
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.dims.input_dim {
            return Err(Error::Shape {
                expected: self.dims.input_dim,
                actual: len,
            });
        }
        Ok(())
    }

    fn check_latent(&self, len: usize) -> Result<()> {
        if len != self.dims.latent_dim {
            return Err(Error::Shape {
                expected: self.dims.latent_dim,
                actual: len,
            });
        }
        Ok(())
    }

    /// Encoder output for a raw (unscaled) input vector.
    pub fn encode_input(&self, input: &[f64]) -> Result<Array1<f64>> {
        self.check_input(input.len())?;
        let x = ArrayView1::from(input).to_owned() * &self.input_scale;
        let x = x.insert_axis(Axis(0));
        let acts = mlp_forward(&self.weights.encoder, x);
        Ok(acts.last().expect("non-empty").row(0).to_owned())
    }

    pub fn encode(&self, tensor: &ScenarioTensor) -> Result<Array1<f64>> {
        self.encode_input(tensor.values())
    }

    pub fn quantize(&self, z: &[f64]) -> Result<(usize, Array1<f64>)> {
        self.check_latent(z.len())?;
        let q = nearest_code(&self.weights.codebook, z);
        Ok((q, self.weights.codebook.row(q).to_owned()))
    }

    /// Decoder output in the scaled input space.
    pub fn decode_scaled(&self, z_q: &[f64]) -> Result<Array1<f64>> {
        self.check_latent(z_q.len())?;
        let z = ArrayView1::from(z_q).to_owned().insert_axis(Axis(0));
        let acts = mlp_forward(&self.weights.decoder, z);
        Ok(acts.last().expect("non-empty").row(0).to_owned())
    }

    /// Decoder output mapped back to input units.
    pub fn decode(&self, z_q: &[f64]) -> Result<Array1<f64>> {
        let scaled = self.decode_scaled(z_q)?;
        Ok(ndarray::Zip::from(&scaled)
            .and(&self.input_scale)
            .map_collect(|&v, &s| if s == 0.0 { 0.0 } else { v / s }))
    }

    pub fn classify(&self, z_q: &[f64]) -> Result<Array1<f64>> {
        self.check_latent(z_q.len())?;
        let logits = self.weights.cl_head.w.dot(&ArrayView1::from(z_q)) + &self.weights.cl_head.b;
        Ok(softmax(logits.view()))
    }

    pub fn predict_interaction(&self, z_q: &[f64]) -> Result<Array1<f64>> {
        self.check_latent(z_q.len())?;
        let logits = self.weights.int_head.w.dot(&ArrayView1::from(z_q)) + &self.weights.int_head.b;
        Ok(logits.mapv(sigmoid))
    }

    /// Predicted interaction matrix for scenario models.
    pub fn predict_interaction_matrix(&self, z_q: &[f64]) -> Result<InteractionMatrix> {
        if self.dims.interaction_dim != N_SLOTS * T_OBS {
            return Err(Error::Shape {
                expected: N_SLOTS * T_OBS,
                actual: self.dims.interaction_dim,
            });
        }
        InteractionMatrix::from_values(self.predict_interaction(z_q)?.to_vec())
    }

    /// Codebook index of a raw input.
    pub fn assign(&self, input: &[f64]) -> Result<usize> {
        let z = self.encode_input(input)?;
        Ok(nearest_code(&self.weights.codebook, z.as_slice().expect("contiguous")))
    }
}

/// Index of the nearest codebook row by squared Euclidean distance; the
/// lowest index wins ties.
pub fn nearest_code(codebook: &Array2<f64>, z: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (q, row) in codebook.outer_iter().enumerate() {
        let d: f64 = row.iter().zip(z).map(|(c, v)| (v - c) * (v - c)).sum();
        if d < best.0 {
            best = (d, q);
        }
    }
    best.1
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.mapv(|v| (v - max).exp());
    let s = e.sum();
    e / s
}

/// Activations `[x, h_1, ..., y]`; tanh on hidden layers, linear output.
pub(crate) fn mlp_forward(layers: &[Dense], x: Array2<f64>) -> Vec<Array2<f64>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x);
    for (i, layer) in layers.iter().enumerate() {
        let mut h = layer.forward(acts.last().expect("non-empty"));
        if i + 1 < layers.len() {
            h.mapv_inplace(f64::tanh);
        }
        acts.push(h);
    }
    acts
}

/// Accumulates layer gradients into `grads` and returns the gradient with
/// respect to the MLP input.
pub(crate) fn mlp_backward(
    layers: &[Dense],
    acts: &[Array2<f64>],
    mut delta: Array2<f64>,
    grads: &mut [Dense],
) -> Array2<f64> {
    for i in (0..layers.len()).rev() {
        if i + 1 < layers.len() {
            delta.zip_mut_with(&acts[i + 1], |d, &h| *d *= 1.0 - h * h);
        }
        grads[i].w += &delta.t().dot(&acts[i]);
        grads[i].b += &delta.sum_axis(Axis(0));
        delta = delta.dot(&layers[i].w);
    }
    delta
}
