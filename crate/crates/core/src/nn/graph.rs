//! Reverse-mode automatic differentiation over dense `f64` buffers.
//!
//! A [`Graph`] is an append-only arena of nodes. Every operation pushes a new
//! node whose parents have smaller indices, so reverse index order is a valid
//! topological order for the backward sweep. Nodes are addressed by the
//! copyable handle [`Var`].
//!
//! Values are flat buffers; matrices (only used as the weight operand of
//! [`Graph::linear`]) are row-major with an explicit shape.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{bail, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn vector(n: usize) -> Self {
        Self { rows: n, cols: 1 }
    }

    pub fn len(self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `W x + b` with `W` of shape `out x in`.
    Linear {
        weight: Var,
        bias: Var,
        input: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// `scale * x + shift`, elementwise with scalar constants.
    Affine {
        input: Var,
        scale: f64,
    },
    Tanh(Var),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Square(Var),
    Sum(Var),
    /// Sums consecutive runs of `segment` elements.
    SegmentSum {
        input: Var,
        segment: usize,
    },
    Dot(Var, Var),
    Gather {
        input: Var,
        indices: Vec<usize>,
    },
    Concat(Vec<Var>),
    Softmax(Var),
    LogSoftmax(Var),
    LogSumExp(Var),
    /// Repeats a scalar into a vector of the given length.
    Broadcast {
        input: Var,
    },
    Huber {
        input: Var,
        delta: f64,
    },
    Pinball {
        input: Var,
        tau: f64,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    shape: Shape,
    op: Op,
    requires_grad: bool,
}

/// Computation graph confined to one thread from construction through
/// [`Graph::backward`].
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, shape: Shape, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(value.len(), shape.len());
        self.nodes.push(Node { value, shape, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Differentiable leaf vector (a parameter or a designated input).
    pub fn variable(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(value, Shape::vector(n), Op::Leaf, true)
    }

    /// Differentiable leaf matrix in row-major order.
    pub fn matrix_variable(&mut self, value: Vec<f64>, rows: usize, cols: usize) -> Var {
        self.push(value, Shape { rows, cols }, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(value, Shape::vector(n), Op::Leaf, false)
    }

    pub fn constant_matrix(&mut self, value: Vec<f64>, rows: usize, cols: usize) -> Var {
        self.push(value, Shape { rows, cols }, Op::Leaf, false)
    }

    pub fn scalar_constant(&mut self, value: f64) -> Var {
        self.constant(vec![value])
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    pub fn size(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value: Vec<f64> = self.nodes[x.0].value.iter().map(|&a| f(a)).collect();
        let rg = self.needs(&[x]);
        self.push(value, Shape::vector(self.nodes[x.0].value.len()), op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (na, nb) = (self.size(a), self.size(b));
        if na != nb {
            bail!(Shape, "elementwise operands have lengths {na} and {nb}");
        }
        let value: Vec<f64> = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(&x, &y)| f(x, y)).collect();
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Shape::vector(na), op, rg))
    }

    pub fn linear(&mut self, weight: Var, bias: Var, input: Var) -> Result<Var> {
        let ws = self.shape(weight);
        let n_in = self.size(input);
        if ws.cols != n_in {
            bail!(Shape, "linear layer expects {} inputs, got {n_in}", ws.cols);
        }
        if self.size(bias) != ws.rows {
            bail!(Shape, "bias has length {}, layer has {} outputs", self.size(bias), ws.rows);
        }
        let w = &self.nodes[weight.0].value;
        let b = &self.nodes[bias.0].value;
        let x = &self.nodes[input.0].value;
        let value: Vec<f64> = (0..ws.rows)
            .map(|r| {
                let row = &w[r * ws.cols..(r + 1) * ws.cols];
                b[r] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
            })
            .collect();
        let rg = self.needs(&[weight, bias, input]);
        Ok(self.push(value, Shape::vector(ws.rows), Op::Linear { weight, bias, input }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        self.unary(x, Op::Affine { input: x, scale }, |a| scale * a + shift)
    }

    pub fn scale(&mut self, x: Var, scale: f64) -> Var {
        self.affine(x, scale, 0.0)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), Float::tanh)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Op::Softplus(x), softplus)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), Float::exp)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, Op::Ln(x), Float::ln)
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sqrt(x), Float::sqrt)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Op::Square(x), |a| a * a)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.iter().sum();
        let rg = self.needs(&[x]);
        self.push(vec![s], Shape::vector(1), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.size(x) as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    pub fn segment_sum(&mut self, x: Var, segment: usize) -> Result<Var> {
        let n = self.size(x);
        if segment == 0 || !n.is_multiple_of(segment) {
            bail!(Shape, "cannot split length {n} into segments of {segment}");
        }
        let value: Vec<f64> = self.nodes[x.0].value.chunks_exact(segment).map(|c| c.iter().sum()).collect();
        let rg = self.needs(&[x]);
        Ok(self.push(value, Shape::vector(n / segment), Op::SegmentSum { input: x, segment }, rg))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.size(a), self.size(b));
        if na != nb {
            bail!(Shape, "dot operands have lengths {na} and {nb}");
        }
        let s = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| x * y).sum();
        let rg = self.needs(&[a, b]);
        Ok(self.push(vec![s], Shape::vector(1), Op::Dot(a, b), rg))
    }

    pub fn gather(&mut self, x: Var, indices: Vec<usize>) -> Result<Var> {
        let n = self.size(x);
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            bail!(Shape, "gather index {bad} out of bounds for length {n}");
        }
        let src = &self.nodes[x.0].value;
        let value: Vec<f64> = indices.iter().map(|&i| src[i]).collect();
        let rg = self.needs(&[x]);
        Ok(self.push(value, Shape::vector(indices.len()), Op::Gather { input: x, indices }, rg))
    }

    /// Contiguous sub-range `[start, start + len)`.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        self.gather(x, (start..start + len).collect())
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value: Vec<f64> = parts.iter().flat_map(|p| self.nodes[p.0].value.iter().copied()).collect();
        let rg = self.needs(parts);
        let n = value.len();
        self.push(value, Shape::vector(n), Op::Concat(parts.to_vec()), rg)
    }

    pub fn broadcast(&mut self, scalar: Var, n: usize) -> Result<Var> {
        if self.size(scalar) != 1 {
            bail!(Shape, "broadcast expects a scalar, got length {}", self.size(scalar));
        }
        let v = self.scalar(scalar);
        let rg = self.needs(&[scalar]);
        Ok(self.push(vec![v; n], Shape::vector(n), Op::Broadcast { input: scalar }, rg))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let value = softmax(&self.nodes[x.0].value);
        let rg = self.needs(&[x]);
        let n = value.len();
        self.push(value, Shape::vector(n), Op::Softmax(x), rg)
    }

    pub fn log_softmax(&mut self, x: Var) -> Var {
        let src = &self.nodes[x.0].value;
        let lse = log_sum_exp(src);
        let value: Vec<f64> = src.iter().map(|a| a - lse).collect();
        let rg = self.needs(&[x]);
        let n = value.len();
        self.push(value, Shape::vector(n), Op::LogSoftmax(x), rg)
    }

    pub fn log_sum_exp(&mut self, x: Var) -> Var {
        let v = log_sum_exp(&self.nodes[x.0].value);
        let rg = self.needs(&[x]);
        self.push(vec![v], Shape::vector(1), Op::LogSumExp(x), rg)
    }

    /// Elementwise Huber penalty of a residual vector.
    pub fn huber(&mut self, residual: Var, delta: f64) -> Var {
        self.unary(residual, Op::Huber { input: residual, delta }, |e| huber(e, delta))
    }

    /// Elementwise pinball penalty of a residual `target - prediction`.
    pub fn pinball(&mut self, residual: Var, tau: f64) -> Var {
        self.unary(residual, Op::Pinball { input: residual, tau }, |e| pinball(e, tau))
    }

    /// Log-density of independent Gaussians, summed: `sum_i log N(x_i; mu_i, var_i)`.
    pub fn gaussian_log_density(&mut self, x: Var, mean: Var, var: Var) -> Result<Var> {
        let n = self.size(x);
        let diff = self.sub(x, mean)?;
        let sq = self.square(diff);
        let ratio = self.div(sq, var)?;
        let log_var = self.ln(var);
        let quad = self.sum(ratio);
        let norm = self.sum(log_var);
        let total = self.add(quad, norm)?;
        Ok(self.affine(total, -0.5, -0.5 * n as f64 * LN_2PI))
    }

    /// Runs the backward sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.size(loss) != 1 {
            bail!(Contract, "backward needs a scalar loss, node has {} elements", self.size(loss));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Linear { weight, bias, input } => {
                let ws = self.shape(*weight);
                let x = val(*input);
                let w = val(*weight);
                acc(*weight, &mut |gw| {
                    for r in 0..ws.rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            for (dst, xc) in gw[r * ws.cols..(r + 1) * ws.cols].iter_mut().zip(x) {
                                *dst += gr * xc;
                            }
                        }
                    }
                });
                acc(*bias, &mut |gb| gb.iter_mut().zip(g).for_each(|(d, s)| *d += s));
                acc(*input, &mut |gx| {
                    for r in 0..ws.rows {
                        let gr = g[r];
                        for (dst, wc) in gx.iter_mut().zip(&w[r * ws.cols..(r + 1) * ws.cols]) {
                            *dst += gr * wc;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d += s));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d += s));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d += s));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d -= s));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * vb[i];
                    }
                });
                acc(*b, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * va[i];
                    }
                });
            }
            Op::Div(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] / vb[i];
                    }
                });
                acc(*b, &mut |d| {
                    for i in 0..d.len() {
                        d[i] -= g[i] * va[i] / (vb[i] * vb[i]);
                    }
                });
            }
            Op::Affine { input, scale } => {
                acc(*input, &mut |d| d.iter_mut().zip(g).for_each(|(d, s)| *d += scale * s));
            }
            Op::Tanh(x) => {
                let y = &node.value;
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                });
            }
            Op::Softplus(x) => {
                let vx = val(*x);
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * sigmoid(vx[i]);
                    }
                });
            }
            Op::Exp(x) => {
                let y = &node.value;
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * y[i];
                    }
                });
            }
            Op::Ln(x) => {
                let vx = val(*x);
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] / vx[i];
                    }
                });
            }
            Op::Sqrt(x) => {
                let y = &node.value;
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * 0.5 / y[i];
                    }
                });
            }
            Op::Square(x) => {
                let vx = val(*x);
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * 2.0 * vx[i];
                    }
                });
            }
            Op::Sum(x) => acc(*x, &mut |d| d.iter_mut().for_each(|d| *d += g[0])),
            Op::SegmentSum { input, segment } => {
                acc(*input, &mut |d| {
                    for (i, dst) in d.iter_mut().enumerate() {
                        *dst += g[i / segment];
                    }
                });
            }
            Op::Dot(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &mut |d| d.iter_mut().zip(vb).for_each(|(d, y)| *d += g[0] * y));
                acc(*b, &mut |d| d.iter_mut().zip(va).for_each(|(d, x)| *d += g[0] * x));
            }
            Op::Gather { input, indices } => {
                acc(*input, &mut |d| {
                    for (gi, &src) in g.iter().zip(indices) {
                        d[src] += gi;
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.nodes[p.0].value.len();
                    acc(*p, &mut |d| d.iter_mut().zip(&g[offset..offset + n]).for_each(|(d, s)| *d += s));
                    offset += n;
                }
            }
            Op::Broadcast { input } => {
                let total: f64 = g.iter().sum();
                acc(*input, &mut |d| d[0] += total);
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let inner: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += y[i] * (g[i] - inner);
                    }
                });
            }
            Op::LogSoftmax(x) => {
                let y = &node.value;
                let total: f64 = g.iter().sum();
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] - y[i].exp() * total;
                    }
                });
            }
            Op::LogSumExp(x) => {
                let vx = val(*x);
                let lse = node.value[0];
                acc(*x, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[0] * (vx[i] - lse).exp();
                    }
                });
            }
            Op::Huber { input, delta } => {
                let vx = val(*input);
                acc(*input, &mut |d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * vx[i].max(-*delta).min(*delta);
                    }
                });
            }
            Op::Pinball { input, tau } => {
                let vx = val(*input);
                acc(*input, &mut |d| {
                    for i in 0..d.len() {
                        let slope = if vx[i] < 0.0 { tau - 1.0 } else { *tau };
                        d[i] += g[i] * slope;
                    }
                });
            }
        }
    }
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when the loss does not
    /// depend on `v` or `v` does not require gradients.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient with respect to `v`, zero-filled when the loss does not depend on it.
    pub fn get_or_zeros(&self, v: Var, len: usize) -> Vec<f64> {
        self.get(v).map_or_else(|| vec![0.0; len], <[f64]>::to_vec)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(sum(exp(x)))`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

pub fn huber(e: f64, delta: f64) -> f64 {
    let a = e.abs();
    if a <= delta {
        0.5 * e * e
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub fn pinball(e: f64, tau: f64) -> f64 {
    if e < 0.0 {
        (tau - 1.0) * e
    } else {
        tau * e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let mut g = Graph::new();
        let w = g.variable(vec![2.0]);
        let x = g.constant(vec![3.0]);
        let loss = g.mul(w, x).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap(), &[3.0]);
        assert!(grads.get(x).is_none());
    }

    #[test]
    fn unrelated_parameter_gets_zero() {
        let mut g = Graph::new();
        let w = g.variable(vec![2.0]);
        let p = g.variable(vec![5.0]);
        let loss = g.square(w);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get_or_zeros(p, 1), vec![0.0]);
        assert_eq!(grads.get(w).unwrap(), &[4.0]);
    }

    #[test]
    fn non_scalar_loss_is_a_contract_error() {
        let mut g = Graph::new();
        let w = g.variable(vec![1.0, 2.0]);
        assert!(matches!(g.backward(w), Err(crate::Error::Contract(_))));
    }

    #[test]
    fn shape_mismatch() {
        let mut g = Graph::new();
        let a = g.variable(vec![1.0, 2.0]);
        let b = g.variable(vec![1.0]);
        assert!(matches!(g.add(a, b), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.5, 1.0), 0.125);
        assert_eq!(huber(2.0, 1.0), 1.5);
        assert_eq!(huber(-2.0, 1.0), 1.5);
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
