//! Layer vocabulary of the summarizer. Every layer is a plain function of
//! parameter handles and inputs recorded on a [`Tape`].
//!
//! Parameter structs are generic over storage: `T = Tensor` for owned
//! weights, `T = Var` once registered on a tape.

mod attention;
mod gnn;
mod gru;

pub use attention::attention;
pub use gnn::{aggregation_operator, convgnn_layer, convgnn_stack, ConvGnnParams};
pub use gru::{gru_forward, gru_sequence, GruParams};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var, TensorError> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

/// Weight matrix plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub w: T,
    pub b: T,
}

impl DenseParams<Tensor> {
    /// Glorot-uniform weights, zero bias.
    pub fn init(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: glorot(rng, fan_in, fan_out),
            b: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn register(&self, tape: &mut Tape) -> DenseParams<Var> {
        DenseParams {
            w: tape.leaf(self.w.clone()),
            b: tape.leaf(self.b.clone()),
        }
    }
}

/// `activation(x·W + b)` applied to every row of `x`.
pub fn dense(tape: &mut Tape, x: Var, p: &DenseParams<Var>, act: Activation) -> Result<Var, TensorError> {
    let y = tape.matmul(x, p.w)?;
    let y = tape.add_row(y, p.b)?;
    act.apply(tape, y)
}

/// Row lookup of `ids` in an embedding table.
pub fn embed(tape: &mut Tape, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
    tape.gather_rows(table, ids)
}

/// Sizes shared by every layer of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDims {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub hops: usize,
    pub code_len: usize,
    pub ast_len: usize,
    pub sum_len: usize,
}

impl LayerDims {
    /// Dimensions used for the published model.
    pub fn paper(src_vocab: usize, tgt_vocab: usize) -> Self {
        Self {
            embed_dim: 100,
            hidden_dim: 256,
            src_vocab,
            tgt_vocab,
            hops: 2,
            code_len: 100,
            ast_len: 100,
            sum_len: 13,
        }
    }

    /// Miniature dimensions that train in seconds on the bundled corpus.
    pub fn desk(src_vocab: usize, tgt_vocab: usize) -> Self {
        Self {
            embed_dim: 32,
            hidden_dim: 64,
            src_vocab,
            tgt_vocab,
            hops: 2,
            code_len: 30,
            ast_len: 40,
            sum_len: 13,
        }
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        let fields = [
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("src_vocab", self.src_vocab),
            ("tgt_vocab", self.tgt_vocab),
            ("hops", self.hops),
            ("code_len", self.code_len),
            ("ast_len", self.ast_len),
            ("sum_len", self.sum_len),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(TensorError::Invalid {
                    op: "dims",
                    reason: format!("{name} must be positive"),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, &[fan_in, fan_out], limit)
}

/// Independent draws from `uniform(-limit, limit)`.
pub fn uniform(rng: &mut impl Rng, shape: &[usize], limit: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn embed_repeated_ids() {
        let mut tape = Tape::new();
        let table = tape.leaf(rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let e = embed(&mut tape, table, &[0, 0]).unwrap();
        assert_eq!(tape.value(e).data(), &[1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn embed_identity_is_onehot() {
        let mut tape = Tape::new();
        let table = tape.leaf(Tensor::identity(4));
        let e = embed(&mut tape, table, &[2]).unwrap();
        assert_eq!(tape.value(e).data(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(embed(&mut tape, table, &[4]).is_err());
    }

    #[test]
    fn embed_gradient_hits_gathered_rows_only() {
        let mut tape = Tape::new();
        let table = tape.leaf(Tensor::zeros(&[3, 2]));
        let e = embed(&mut tape, table, &[1, 1]).unwrap();
        let s = tape.sum(e).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(table).unwrap().data(), &[0.0, 0.0, 2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn dense_identity_and_hand_case() {
        let mut tape = Tape::new();
        let x = tape.constant(rows(&[&[0.5, -1.0]]));
        let id = DenseParams {
            w: tape.constant(Tensor::identity(2)),
            b: tape.constant(Tensor::zeros(&[2])),
        };
        let y = dense(&mut tape, x, &id, Activation::Identity).unwrap();
        assert_eq!(tape.value(y), tape.value(x));

        let ones = tape.constant(Tensor::ones(&[1, 2]));
        let p = DenseParams {
            w: tape.constant(rows(&[&[1.0, 2.0], &[3.0, 4.0]])),
            b: tape.constant(Tensor::vector(vec![1.0, 1.0])),
        };
        let y = dense(&mut tape, ones, &p, Activation::Identity).unwrap();
        assert_eq!(tape.value(y).data(), &[5.0, 7.0]);

        let y = dense(&mut tape, x, &id, Activation::Relu).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.0]);

        let bad = tape.constant(Tensor::ones(&[1, 3]));
        assert!(dense(&mut tape, bad, &p, Activation::Identity).is_err());
    }

    #[test]
    fn dims_validation() {
        let mut d = LayerDims::desk(10, 10);
        assert!(d.validate().is_ok());
        d.hops = 0;
        assert!(d.validate().is_err());
        let p = LayerDims::paper(10908, 10000);
        assert_eq!((p.embed_dim, p.hidden_dim, p.hops), (100, 256, 2));
    }
}
