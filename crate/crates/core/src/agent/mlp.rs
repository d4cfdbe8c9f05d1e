//! Dense feed-forward networks with explicit backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative from the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Fully connected layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    #[inline]
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parameter gradients laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// Flattened in the same order as [`Mlp::params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Network with layer widths `sizes` (input first), all parameters zero.
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::domain(format!("invalid layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer::zeros(w[0], w[1], if i == last { output } else { hidden }))
            .collect();
        Ok(Self { layers })
    }

    /// Uniform fan-in initialisation `U(-1/√fan_in, 1/√fan_in)` for every
    /// layer, with the final layer further scaled by `final_scale`.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        final_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        let n = net.layers.len();
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let mut bound = 1.0 / (layer.inputs as f64).sqrt();
            if i + 1 == n {
                bound *= final_scale;
            }
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim("network input", self.input_dim(), x.len())?;
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = (0..layer.outputs)
                .map(|o| layer.activation.apply(layer.bias[o] + dot(layer.row(o), &a)))
                .collect();
        }
        Ok(a)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        Error::check_dim("network input", self.input_dim(), x.len())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(x.to_vec());
        for layer in &self.layers {
            let input = activations.last().expect("input pushed");
            let z: Vec<f64> = (0..layer.outputs)
                .map(|o| layer.bias[o] + dot(layer.row(o), input))
                .collect();
            let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(Trace {
            activations,
            pre_activations,
        })
    }

    /// Backpropagates `grad_output` (∂L/∂output) through the pass in `trace`.
    ///
    /// Parameter gradients are accumulated into `grads` when given. Returns
    /// ∂L/∂input for input indices `input_from..`; earlier entries are left
    /// at zero so callers that only need part of the input gradient skip the
    /// cost of the rest.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_output: &[f64],
        mut grads: Option<&mut Grads>,
        input_from: usize,
    ) -> Vec<f64> {
        let mut delta: Vec<f64> = grad_output.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre_activations[l];
            let a = &trace.activations[l + 1];
            for o in 0..layer.outputs {
                delta[o] *= layer.activation.derivative(z[o], a[o]);
            }
            let input = &trace.activations[l];
            if let Some(g) = grads.as_deref_mut() {
                let gw = &mut g.weights[l];
                let gb = &mut g.bias[l];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (w, x) in row.iter_mut().zip(input) {
                        *w += d * x;
                    }
                }
            }
            let from = if l == 0 { input_from } else { 0 };
            let mut next = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = layer.row(o);
                for i in from..layer.inputs {
                    next[i] += d * row[i];
                }
            }
            delta = next;
        }
        delta
    }

    /// All parameters, layer by layer (weights then bias).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        Error::check_dim("parameter vector", self.param_count(), flat.len())?;
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }

    /// Polyak averaging `self ← (1 − rate)·self + rate·online`.
    pub fn soft_update_from(&mut self, online: &Mlp, rate: f64) -> Result<()> {
        if !self.same_shape(online) {
            return Err(Error::domain("soft update between networks of different shapes"));
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::domain(format!("soft-update rate {rate} outside [0, 1]")));
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (x, y) in t
                .weights
                .iter_mut()
                .zip(&o.weights)
                .chain(t.bias.iter_mut().zip(&o.bias))
            {
                *x = if rate == 1.0 { *y } else { (1.0 - rate) * *x + rate * *y };
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }
}
