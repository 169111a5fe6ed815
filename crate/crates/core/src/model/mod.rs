//! The code+gnn+GRU summarizer and its flattened-AST baseline.

mod checkpoint;
mod export;
mod forward;
mod train;

pub use checkpoint::{checkpoint_json, load_checkpoint, parse_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use export::{export_attention, AttentionDump, AttentionStep};
pub use forward::{decode, encode, forward, greedy_decode, DecoderOutput, EncoderOutput, ForwardOutput, ModelInput};
pub use train::{accuracy, train, train_observed, Adam, EpochRecord, Optimizer, TrainConfig, TrainOutcome};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, Tensor, TensorError, Var};
use crate::layers::{uniform, ConvGnnParams, DenseParams, GruParams, LayerDims};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("non-finite value in `{op}` during epoch {epoch}, batch {batch} (methods {ids:?})")]
    NonFinite {
        epoch: usize,
        batch: usize,
        op: &'static str,
        ids: Vec<String>,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which AST encoder feeds the second attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ModelVariant {
    /// ConvGNN hops over the AST graph, then a GRU.
    #[default]
    #[serde(rename = "gnn")]
    CodeGnnGru,
    /// A GRU over the flattened AST token sequence.
    #[serde(rename = "flat")]
    AstAttendGruFlat,
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelVariant::CodeGnnGru => "gnn",
            ModelVariant::AstAttendGruFlat => "flat",
        })
    }
}

impl FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gnn" => Ok(ModelVariant::CodeGnnGru),
            "flat" => Ok(ModelVariant::AstAttendGruFlat),
            _ => Err(format!("unknown variant `{s}` (expected gnn or flat)")),
        }
    }
}

/// Every trainable array, keyed by a stable dotted name.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: LayerDims,
    pub variant: ModelVariant,
    pub seed: u64,
    tensors: BTreeMap<String, Tensor>,
}

const GRUS: [&str; 3] = ["encoder_gru", "ast_gru", "decoder_gru"];

fn hop_name(k: usize, field: &str) -> String {
    format!("ast_gnn.hop{k:02}.{field}")
}

impl ModelParams {
    /// Seeded initialization: uniform(-0.05, 0.05) embeddings,
    /// Glorot-uniform matrices and zero biases. Each parameter group draws
    /// from its own stream, so groups shared by both variants start equal.
    pub fn build(dims: LayerDims, variant: ModelVariant, seed: u64) -> Result<Self, ModelError> {
        dims.validate()?;
        let (d, u) = (dims.embed_dim, dims.hidden_dim);
        let mut stream = 0;
        let mut rng = || {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(stream);
            stream += 1;
            r
        };
        let mut t = BTreeMap::new();
        t.insert("shared_embedding".into(), uniform(&mut rng(), &[dims.src_vocab, d], 0.05));
        t.insert("decoder_embedding".into(), uniform(&mut rng(), &[dims.tgt_vocab, d], 0.05));
        for name in GRUS {
            let g = GruParams::init(&mut rng(), d, u);
            for (field, v) in GruParams::<Tensor>::NAMES.iter().zip(g.fields()) {
                t.insert(format!("{name}.{field}"), v.clone());
            }
        }
        let mut gnn_rng = rng();
        if variant == ModelVariant::CodeGnnGru {
            let g = ConvGnnParams::init(&mut gnn_rng, d, dims.hops);
            for (k, hop) in g.hops.into_iter().enumerate() {
                t.insert(hop_name(k, "w"), hop.w);
                t.insert(hop_name(k, "b"), hop.b);
            }
        }
        let ctx = DenseParams::init(&mut rng(), 3 * u, u);
        t.insert("ctx_dense.w".into(), ctx.w);
        t.insert("ctx_dense.b".into(), ctx.b);
        let out = DenseParams::init(&mut rng(), dims.sum_len * u, dims.tgt_vocab);
        t.insert("out_dense.w".into(), out.w);
        t.insert("out_dense.b".into(), out.b);
        Ok(Self {
            dims,
            variant,
            seed,
            tensors: t,
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    /// Replaces one array; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<(), ModelError> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| ModelError::Input(format!("no parameter named `{name}`")))?;
        if slot.shape() != value.shape() {
            return Err(ModelError::Input(format!(
                "parameter `{name}` has shape {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut BTreeMap<String, Tensor> {
        &mut self.tensors
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Number of (W, b) pairs in the ConvGNN stack.
    pub fn gnn_hops(&self) -> usize {
        (0..).take_while(|&k| self.tensors.contains_key(&hop_name(k, "w"))).count()
    }

    /// Order-sensitive FNV-1a hash over names, shapes and bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (name, t) in &self.tensors {
            feed(name.as_bytes());
            for &s in t.shape() {
                feed(&(s as u64).to_le_bytes());
            }
            for &v in t.data() {
                feed(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    /// Records every array on `tape`. `Trainable` makes leaves, `Frozen`
    /// constants; `Probe` swaps in an existing var for one name and
    /// freezes the rest.
    pub fn bind(&self, tape: &mut Tape, binding: Binding<'_>) -> Result<Bound, ModelError> {
        let mut vars = BTreeMap::new();
        let mut probed = false;
        for (name, t) in &self.tensors {
            let v = match binding {
                Binding::Trainable => tape.leaf(t.clone()),
                Binding::Frozen => tape.constant(t.clone()),
                Binding::Probe { name: target, var } if target == name => {
                    if tape.shape(var) != t.shape() {
                        return Err(ModelError::Input(format!("probe for `{name}` has the wrong shape")));
                    }
                    probed = true;
                    var
                }
                Binding::Probe { .. } => tape.constant(t.clone()),
            };
            vars.insert(name.clone(), v);
        }
        if let Binding::Probe { name, .. } = binding {
            if !probed {
                return Err(ModelError::Input(format!("no parameter named `{name}`")));
            }
        }
        let gru = |prefix: &str| GruParams::from_fields(GruParams::<Var>::NAMES.map(|f| vars[&format!("{prefix}.{f}")]));
        let dense = |prefix: &str| DenseParams {
            w: vars[&format!("{prefix}.w")],
            b: vars[&format!("{prefix}.b")],
        };
        let hops = self.gnn_hops();
        Ok(Bound {
            shared_embedding: vars["shared_embedding"],
            decoder_embedding: vars["decoder_embedding"],
            encoder_gru: gru("encoder_gru"),
            ast_gru: gru("ast_gru"),
            decoder_gru: gru("decoder_gru"),
            ast_gnn: (hops > 0).then(|| ConvGnnParams {
                hops: (0..hops)
                    .map(|k| DenseParams {
                        w: vars[&hop_name(k, "w")],
                        b: vars[&hop_name(k, "b")],
                    })
                    .collect(),
            }),
            ctx_dense: dense("ctx_dense"),
            out_dense: dense("out_dense"),
            vars,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Binding<'a> {
    Trainable,
    Frozen,
    Probe { name: &'a str, var: Var },
}

/// Parameters recorded on one tape.
#[derive(Debug, Clone)]
pub struct Bound {
    pub shared_embedding: Var,
    pub decoder_embedding: Var,
    pub encoder_gru: GruParams<Var>,
    pub ast_gru: GruParams<Var>,
    pub decoder_gru: GruParams<Var>,
    pub ast_gnn: Option<ConvGnnParams<Var>>,
    pub ctx_dense: DenseParams<Var>,
    pub out_dense: DenseParams<Var>,
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }

    /// Gradient of every trainable array after `backward`, zero-filled
    /// where nothing flowed.
    pub fn grads(&self, tape: &Tape) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .map(|(name, &v)| {
                let g = tape
                    .grad(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(tape.shape(v)));
                (name.clone(), g)
            })
            .collect()
    }
}
