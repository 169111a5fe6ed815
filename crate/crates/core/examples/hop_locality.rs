//! Shows how far information travels through a ConvGNN stack: for a path
//! of nodes, prints which inputs influence node 0 after k hops.
//!
//! Each row is the gradient of node 0's output with respect to every input
//! node; a `#` marks a nonzero entry.

use astsumm::autodiff::{Tape, Tensor};
use astsumm::graph::{Adjacency, Aggregation};
use astsumm::layers::{convgnn_stack, Activation, ConvGnnParams, DenseParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 8;
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    let adj = Adjacency::from_edges(n, &edges)?;
    println!("path graph 0-1-...-{}", n - 1);
    for k in 1..=5 {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::identity(n));
        let hops = (0..k)
            .map(|_| DenseParams {
                w: tape.constant(Tensor::identity(n)),
                b: tape.constant(Tensor::zeros(&[n])),
            })
            .collect();
        let y = convgnn_stack(&mut tape, x, &adj, &ConvGnnParams { hops }, Aggregation::Sum, Activation::Relu)?;
        let row = tape.gather_rows(y, &[0])?;
        let loss = tape.sum(row)?;
        tape.backward(loss)?;
        let grad = tape.grad(x).expect("input is trainable");
        let marks: String = (0..n)
            .map(|j| if grad.row(j).iter().any(|&g| g != 0.0) { '#' } else { '.' })
            .collect();
        println!("k = {k}: {marks}");
    }
    Ok(())
}
