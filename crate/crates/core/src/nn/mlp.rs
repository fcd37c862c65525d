use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::graph::{Gradients, Graph, Var};
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Activation::Identity),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Shape of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Row-major `outputs x inputs`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Dense feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// Glorot-normal weights, zero biases. `dims` lists every layer width
    /// including input and output; hidden layers use `tanh`, the output layer
    /// `output`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output widths");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (n_in, n_out) = (w[0], w[1]);
                let activation = if i + 2 == dims.len() { output } else { Activation::Tanh };
                let std = (2.0 / (n_in + n_out) as f64).sqrt();
                let weight = (0..n_in * n_out).map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect();
                Layer { spec: LayerSpec { inputs: n_in, outputs: n_out, activation }, weight, bias: vec![0.0; n_out] }
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            bail!(Validation, "MLP has no layers");
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weight.len() != l.spec.inputs * l.spec.outputs || l.bias.len() != l.spec.outputs {
                bail!(Shape, "layer {i}: parameter sizes do not match {:?}", l.spec);
            }
            if l.weight.iter().chain(&l.bias).any(|w| !w.is_finite()) {
                bail!(Validation, "layer {i}: non-finite parameter");
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].spec.outputs != w[1].spec.inputs {
                bail!(Shape, "layer {i} emits {} values but layer {} expects {}", w[0].spec.outputs, i + 1, w[1].spec.inputs);
            }
        }
        Ok(Self { layers })
    }

    /// Single linear layer computing the identity map.
    pub fn identity(n: usize) -> Self {
        let mut weight = vec![0.0; n * n];
        for i in 0..n {
            weight[i * n + i] = 1.0;
        }
        Self {
            layers: vec![Layer { spec: LayerSpec { inputs: n, outputs: n, activation: Activation::Identity }, weight, bias: vec![0.0; n] }],
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn arch(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameter tensors in a fixed order: weight then bias, layer by layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()]).collect()
    }

    /// Mutable tensors with diagnostic names, same order as [`Mlp::tensors`].
    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut [f64])> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                [(format!("{prefix}.layer{i}.weight"), l.weight.as_mut_slice()), (format!("{prefix}.layer{i}.bias"), l.bias.as_mut_slice())]
            })
            .collect()
    }

    /// Places the parameters on `g`; `trainable` decides whether they
    /// receive gradients.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundMlp {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let (w, b) = if trainable {
                    (g.matrix_variable(l.weight.clone(), l.spec.outputs, l.spec.inputs), g.variable(l.bias.clone()))
                } else {
                    (g.constant_matrix(l.weight.clone(), l.spec.outputs, l.spec.inputs), g.constant(l.bias.clone()))
                };
                (w, b, l.spec.activation)
            })
            .collect();
        BoundMlp { layers }
    }

    /// Binds trainable parameters and evaluates on a constant input.
    pub fn forward(&self, g: &mut Graph, input: &[f64]) -> Result<(Var, BoundMlp)> {
        if input.len() != self.input_dim() {
            bail!(Shape, "MLP expects {} inputs, got {}", self.input_dim(), input.len());
        }
        let bound = self.bind(g, true);
        let x = g.constant(input.to_vec());
        let y = bound.forward(g, x)?;
        Ok((y, bound))
    }

    /// Plain evaluation without recording a graph.
    pub fn eval(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let x = g.constant(input.to_vec());
        let y = bound.forward(&mut g, x)?;
        Ok(g.value(y).to_vec())
    }
}

/// Parameters of an [`Mlp`] placed on a [`Graph`].
#[derive(Debug, Clone)]
pub struct BoundMlp {
    layers: Vec<(Var, Var, Activation)>,
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, input: Var) -> Result<Var> {
        let mut h = input;
        for &(w, b, act) in &self.layers {
            h = g.linear(w, b, h)?;
            if act == Activation::Tanh {
                h = g.tanh(h);
            }
        }
        Ok(h)
    }

    /// Parameter handles in [`Mlp::tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b, _)| [w, b]).collect()
    }

    /// Gradients in [`Mlp::tensors`] order; zeros where the loss does not
    /// depend on a parameter.
    pub fn grads(&self, g: &Graph, grads: &Gradients) -> Vec<Vec<f64>> {
        self.vars().into_iter().map(|v| grads.get_or_zeros(v, g.size(v))).collect()
    }
}
