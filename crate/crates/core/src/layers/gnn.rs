use rand::Rng;

use super::{Activation, DenseParams};
use crate::autodiff::{Tape, Tensor, TensorError, Var};
use crate::graph::{Adjacency, Aggregation};

/// One `(W, b)` pair per hop, applied in series.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGnnParams<T> {
    pub hops: Vec<DenseParams<T>>,
}

impl ConvGnnParams<Tensor> {
    pub fn init(rng: &mut impl Rng, dim: usize, hops: usize) -> Self {
        Self {
            hops: (0..hops).map(|_| DenseParams::init(rng, dim, dim)).collect(),
        }
    }

    pub fn register(&self, tape: &mut Tape) -> ConvGnnParams<Var> {
        ConvGnnParams {
            hops: self.hops.iter().map(|p| p.register(tape)).collect(),
        }
    }
}

/// Aggregation operator for `adjacency` as a tape constant, checked
/// against the node count of `nodes`.
pub fn aggregation_operator(
    tape: &mut Tape,
    nodes: Var,
    adjacency: &Adjacency,
    mode: Aggregation,
) -> Result<Var, TensorError> {
    let n = tape.value(nodes).rows();
    if adjacency.len() != n {
        return Err(TensorError::ShapeMismatch {
            op: "convgnn",
            left: tape.shape(nodes).to_vec(),
            right: vec![adjacency.len()],
        });
    }
    Ok(tape.constant(adjacency.aggregation_matrix(mode)))
}

/// `out_i = act((x_i + Σ_{j∈N(i)} x_j)·W + b)`, or the mean of the same
/// terms under [`Aggregation::Mean`].
pub fn convgnn_layer(
    tape: &mut Tape,
    nodes: Var,
    adjacency: &Adjacency,
    p: &DenseParams<Var>,
    mode: Aggregation,
    act: Activation,
) -> Result<Var, TensorError> {
    let agg = aggregation_operator(tape, nodes, adjacency, mode)?;
    apply_hop(tape, nodes, agg, p, act)
}

fn apply_hop(tape: &mut Tape, nodes: Var, agg: Var, p: &DenseParams<Var>, act: Activation) -> Result<Var, TensorError> {
    let mixed = tape.matmul(agg, nodes)?;
    super::dense(tape, mixed, p, act)
}

/// Applies the hop layers in order; hop `t` feeds hop `t + 1`.
pub fn convgnn_stack(
    tape: &mut Tape,
    nodes: Var,
    adjacency: &Adjacency,
    p: &ConvGnnParams<Var>,
    mode: Aggregation,
    act: Activation,
) -> Result<Var, TensorError> {
    let agg = aggregation_operator(tape, nodes, adjacency, mode)?;
    let mut x = nodes;
    for hop in &p.hops {
        x = apply_hop(tape, x, agg, hop, act)?;
    }
    Ok(x)
}
