use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, TensorError};

/// Undirected strict-neighbor lists over `0..len()` nodes.
///
/// The self term of a graph convolution lives in the layer, so lists never
/// contain their own node.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

/// How a node combines itself with its neighbors before the linear map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
}

impl Adjacency {
    /// Validates that lists are in range, loop-free and symmetric.
    pub fn new(neighbors: Vec<Vec<usize>>) -> Result<Self, TensorError> {
        let n = neighbors.len();
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if j >= n {
                    return Err(TensorError::IndexOutOfRange {
                        op: "adjacency",
                        index: j,
                        bound: n,
                    });
                }
                if j == i {
                    return Err(TensorError::Invalid {
                        op: "adjacency",
                        reason: format!("self loop at node {i}"),
                    });
                }
                if !neighbors[j].contains(&i) {
                    return Err(TensorError::Invalid {
                        op: "adjacency",
                        reason: format!("edge {i}->{j} has no reverse edge"),
                    });
                }
            }
        }
        Ok(Self { neighbors })
    }

    /// Builds from undirected edge pairs; duplicates are collapsed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, TensorError> {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            let bound = n;
            for idx in [a, b] {
                if idx >= bound {
                    return Err(TensorError::IndexOutOfRange {
                        op: "adjacency",
                        index: idx,
                        bound,
                    });
                }
            }
            if !neighbors[a].contains(&b) {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        Self::new(neighbors)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Pads with isolated nodes up to `n` (no-op when already that large).
    pub fn padded(&self, n: usize) -> Self {
        let mut neighbors = self.neighbors.clone();
        if neighbors.len() < n {
            neighbors.resize(n, Vec::new());
        }
        Self { neighbors }
    }

    /// Dense `N×N` operator `M` such that `M·X` performs one aggregation
    /// step (self plus neighbors) over node rows `X`.
    pub fn aggregation_matrix(&self, mode: Aggregation) -> Tensor {
        let n = self.len().max(1);
        let mut m = Tensor::zeros(&[n, n]);
        let data = m.data_mut();
        for (i, list) in self.neighbors.iter().enumerate() {
            let w = match mode {
                Aggregation::Sum => 1.0,
                Aggregation::Mean => 1.0 / (list.len() + 1) as f64,
            };
            data[i * n + i] = w;
            for &j in list {
                data[i * n + j] += w;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_out_of_range() {
        assert!(Adjacency::new(vec![vec![1], vec![]]).is_err());
        assert!(Adjacency::new(vec![vec![2], vec![]]).is_err());
        assert!(Adjacency::new(vec![vec![0]]).is_err());
        assert!(Adjacency::new(vec![vec![1], vec![0]]).is_ok());
    }

    #[test]
    fn aggregation_matrix_rows() {
        // path 0-1-2
        let adj = Adjacency::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let sum = adj.aggregation_matrix(Aggregation::Sum);
        assert_eq!(sum.data(), &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let mean = adj.aggregation_matrix(Aggregation::Mean);
        assert_eq!(mean.row(1), &[1.0 / 3.0; 3]);
        assert_eq!(mean.row(0), &[0.5, 0.5, 0.0]);
        assert_eq!(adj.edge_count(), 2);
    }
}
