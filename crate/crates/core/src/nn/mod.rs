//! Minimal neural-network kernel: autodiff graph, dense layers, optimizer.

mod adam;
pub mod fd;
mod graph;
mod mlp;

pub use adam::Adam;
pub use graph::{huber, log_sum_exp, pinball, sigmoid, softmax, softplus, Gradients, Graph, Shape, Var};
pub use mlp::{Activation, BoundMlp, Layer, LayerSpec, Mlp};
