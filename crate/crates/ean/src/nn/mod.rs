//! Minimal dense-network math: forward pass, exact analytic gradients, and
//! optimizers. Shared by the controller, the novelty-bonus networks, and the
//! toy supernet. Everything is `f64`; weights are row-major `(out_dim, in_dim)`.

mod checkpoint;
mod optim;

pub use checkpoint::{load_mlp, read_mlp, save_mlp, sidecar_path, write_mlp, MAGIC};
pub use optim::{Direction, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

use crate::error::{Error, Result};
use rand::Rng;

/// Per-layer elementwise activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in terms of the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Sigmoid),
            2 => Ok(Activation::Identity),
            _ => Err(Error::InvalidConfig(format!("unknown activation code {code}"))),
        }
    }
}

/// One dense layer: `y = activation(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `(out_dim, in_dim)`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Layer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.in_dim + inp]
    }

    pub fn set_weight(&mut self, out: usize, inp: usize, v: f64) {
        self.weights[out * self.in_dim + inp] = v;
    }

    pub fn set_bias(&mut self, out: usize, v: f64) {
        self.biases[out] = v;
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(self.activation.apply(z));
        }
    }
}

/// A dense feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Intermediate activations of one forward pass, used for backprop.
/// `activations[0]` is the input; `activations[l + 1]` is layer `l`'s output.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least the input")
    }
}

/// Per-parameter partials of a scalar objective, shape-congruent with an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        GradientBundle {
            d_weights: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_biases: mlp.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// `self += other * factor`. Shapes must match.
    pub fn add_scaled(&mut self, other: &GradientBundle, factor: f64) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += factor * y;
            }
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += factor * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.d_weights.iter_mut().chain(self.d_biases.iter_mut()) {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_weights
            .iter()
            .chain(self.d_biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.d_weights
            .iter()
            .chain(self.d_biases.iter())
            .all(|v| v.iter().all(|x| *x == 0.0))
    }

    fn congruent_with(&self, mlp: &Mlp) -> bool {
        self.d_weights.len() == mlp.layers.len()
            && self.d_biases.len() == mlp.layers.len()
            && self
                .d_weights
                .iter()
                .zip(&mlp.layers)
                .all(|(g, l)| g.len() == l.weights.len())
            && self
                .d_biases
                .iter()
                .zip(&mlp.layers)
                .all(|(g, l)| g.len() == l.biases.len())
    }
}

impl Mlp {
    /// Build a network from `layer_dims` (input width first) with one
    /// activation per layer. Weights and biases are initialized uniformly in
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` from the caller's generator.
    pub fn new<R: Rng>(layer_dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(layer_dims, activations)?;
        for layer in &mut mlp.layers {
            let bound = 1.0 / (layer.in_dim as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..=bound);
            }
            for b in &mut layer.biases {
                *b = rng.random_range(-bound..=bound);
            }
        }
        Ok(mlp)
    }

    /// Zero out the last layer. A network whose final layer is all zeros
    /// emits the same output for every input (e.g. sigmoid heads emit 0.5).
    pub fn zero_final_layer(&mut self) {
        let last = self.layers.last_mut().expect("at least one layer");
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.biases.iter_mut().for_each(|b| *b = 0.0);
    }

    /// Build a network with all weights and biases at zero.
    pub fn zeros(layer_dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "layer_dims needs at least an input and an output width".into(),
            ));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("layer dims must be positive".into()));
        }
        if activations.len() != layer_dims.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "expected {} activations, got {}",
                layer_dims.len() - 1,
                activations.len()
            )));
        }
        let layers = layer_dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Layer::zeros(w[0], w[1], act))
            .collect();
        Ok(Mlp { layers })
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub(crate) fn from_layers(layers: Vec<Layer>) -> Self {
        Mlp { layers }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|x| x.is_finite()))
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "mlp forward input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Forward pass. Deterministic for fixed parameters and input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass keeping every intermediate activation.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.layers {
            let mut out = Vec::new();
            layer.forward_into(activations.last().expect("nonempty"), &mut out);
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Exact analytic gradient of `upstream_grad . output` with respect to every
    /// parameter, treating `upstream_grad` as a constant vector. Also returns
    /// the gradient with respect to the input.
    pub fn backward(&self, input: &[f64], upstream_grad: &[f64]) -> Result<(GradientBundle, Vec<f64>)> {
        let trace = self.forward_trace(input)?;
        self.backward_from_trace(&trace, upstream_grad)
    }

    /// Backprop reusing the activations of a previous [`Mlp::forward_trace`].
    pub fn backward_from_trace(
        &self,
        trace: &Trace,
        upstream_grad: &[f64],
    ) -> Result<(GradientBundle, Vec<f64>)> {
        if upstream_grad.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "mlp backward upstream",
                expected: self.output_dim(),
                actual: upstream_grad.len(),
            });
        }
        let mut grads = GradientBundle::zeros_like(self);
        let mut delta = upstream_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let layer_in = &trace.activations[l];
            let layer_out = &trace.activations[l + 1];
            // delta currently holds dL/d(layer output); fold in the activation.
            for (d, y) in delta.iter_mut().zip(layer_out) {
                *d *= layer.activation.derivative_from_output(*y);
            }
            for o in 0..layer.out_dim {
                grads.d_biases[l][o] += delta[o];
                let row = &mut grads.d_weights[l][o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, x) in row.iter_mut().zip(layer_in) {
                    *g += delta[o] * x;
                }
            }
            let mut prev = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let d = delta[o];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            delta = prev;
        }
        Ok((grads, delta))
    }
}
