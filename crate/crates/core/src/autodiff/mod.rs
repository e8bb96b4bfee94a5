//! Dense-matrix computational graph with reverse-mode differentiation.

mod graph;
mod matrix;
mod optim;
mod params;

pub use graph::{l2_normalize_rows, sigmoid, ForwardStats, Gradients, Graph, NodeId, Op, NORM_FLOOR};
pub(crate) use graph::block_gram;
pub use matrix::Matrix;
pub use optim::Adam;
pub use params::{glorot, init_mlp, ParamSet};
