use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forward::{argmax_token, decode, encode, ModelInput};
use super::{save_checkpoint, Binding, ModelError, ModelParams};
use crate::autodiff::{Tape, Tensor, TensorError};
use crate::data::EncodedMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Methods per optimizer step; each contributes all its prefix rows.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// When set, the best checkpoint so far is kept at `best.json` here.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: Optimizer::Adam,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::Input("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Input("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Input(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &BTreeMap<String, Tensor>) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (name, value) in params.tensors_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            for (((w, &g), m), v) in value.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean cross-entropy per (prefix, target) row.
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters are returned.
    pub best_epoch: usize,
}

struct MethodGrad {
    loss: f64,
    rows: usize,
    grads: BTreeMap<String, Tensor>,
}

fn method_grad(params: &ModelParams, m: &EncodedMethod) -> Result<MethodGrad, TensorError> {
    let lift = |e: ModelError| match e {
        ModelError::Tensor(t) => t,
        other => TensorError::Invalid {
            op: "train",
            reason: other.to_string(),
        },
    };
    let mut tape = Tape::new();
    let p = params.bind(&mut tape, Binding::Trainable).map_err(lift)?;
    let rows = m.rows();
    let enc = encode(&mut tape, &p, &params.dims, params.variant, ModelInput::from_method(m, params.variant))
        .map_err(lift)?;
    let prefixes: Vec<Vec<usize>> = rows.iter().map(|r| r.prefix.clone()).collect();
    let targets: Vec<usize> = rows.iter().map(|r| r.target).collect();
    let out = decode(&mut tape, &p, &params.dims, &enc, &prefixes).map_err(lift)?;
    let loss = tape.cross_entropy(out.logits, &targets)?;
    tape.backward(loss)?;
    Ok(MethodGrad {
        loss: tape.value(loss).item(),
        rows: rows.len(),
        grads: p.grads(&tape),
    })
}

/// Masked next-token accuracy: the share of real (prefix, target) rows
/// whose greedy prediction equals the target.
pub fn accuracy(params: &ModelParams, methods: &[EncodedMethod]) -> Result<f64, ModelError> {
    let counts = methods
        .par_iter()
        .map(|m| -> Result<(usize, usize), ModelError> {
            let mut tape = Tape::new();
            let p = params.bind(&mut tape, Binding::Frozen)?;
            let enc = encode(&mut tape, &p, &params.dims, params.variant, ModelInput::from_method(m, params.variant))?;
            let rows = m.rows();
            let prefixes: Vec<Vec<usize>> = rows.iter().map(|r| r.prefix.clone()).collect();
            let out = decode(&mut tape, &p, &params.dims, &enc, &prefixes)?;
            let logits = tape.value(out.logits);
            let hits = rows
                .iter()
                .enumerate()
                .filter(|(i, r)| argmax_token(logits.row(*i)) == r.target)
                .count();
            Ok((hits, rows.len()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (hits, total) = counts.iter().fold((0, 0), |(h, t), &(a, b)| (h + a, t + b));
    if total == 0 {
        return Err(ModelError::Input("accuracy over an empty set".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Trains for `cfg.epochs` and returns the epoch with the highest
/// validation accuracy (earliest on ties).
pub fn train(
    params: ModelParams,
    train_set: &[EncodedMethod],
    val_set: &[EncodedMethod],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    train_observed(params, train_set, val_set, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_observed(
    mut params: ModelParams,
    train_set: &[EncodedMethod],
    val_set: &[EncodedMethod],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(ModelError::Input("training and validation sets must be nonempty".into()));
    }
    let Optimizer::Adam = cfg.optimizer;
    let mut opt = Adam::new(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut row_sum) = (0.0, 0usize);
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let nonfinite = |op: &'static str| ModelError::NonFinite {
                epoch,
                batch: batch + 1,
                op,
                ids: chunk.iter().map(|&i| train_set[i].id.clone()).collect(),
            };
            let parts = chunk
                .par_iter()
                .map(|&i| method_grad(&params, &train_set[i]))
                .collect::<Vec<_>>();
            let mut total: Option<BTreeMap<String, Tensor>> = None;
            let mut rows = 0;
            for part in parts {
                let part = part.map_err(|e| match e {
                    TensorError::NonFinite { op } => nonfinite(op),
                    other => other.into(),
                })?;
                loss_sum += part.loss;
                rows += part.rows;
                match &mut total {
                    None => total = Some(part.grads),
                    Some(acc) => {
                        for (name, g) in acc.iter_mut() {
                            for (a, b) in g.data_mut().iter_mut().zip(part.grads[name].data()) {
                                *a += b;
                            }
                        }
                    }
                }
            }
            row_sum += rows;
            let mut grads = total.expect("chunks are nonempty");
            let scale = 1.0 / rows as f64;
            for g in grads.values_mut() {
                g.data_mut().iter_mut().for_each(|v| *v *= scale);
            }
            if !loss_sum.is_finite() || grads.values().any(|g| !g.is_finite()) {
                return Err(nonfinite("loss"));
            }
            opt.step(&mut params, &grads);
            if params.tensors().values().any(|t| !t.is_finite()) {
                return Err(nonfinite("adam"));
            }
        }
        let val_acc = accuracy(&params, val_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / row_sum as f64,
            val_acc,
        };
        on_epoch(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(_, acc, _)| val_acc > *acc) {
            if let Some(dir) = &cfg.checkpoint_dir {
                save_checkpoint(&dir.join("best.json"), &params)?;
            }
            best = Some((epoch, val_acc, params.clone()));
        }
    }
    let (best_epoch, _, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_vocab, encode_example, PreparedMethod, RawPair, VocabCaps};
    use crate::layers::LayerDims;
    use crate::model::ModelVariant;

    fn tiny() -> (Vec<EncodedMethod>, LayerDims) {
        let pairs = [
            ("int getX() { return x; }", "returns x"),
            ("void setY(int v) { y = v; }", "sets the y"),
        ];
        let prepared: Vec<PreparedMethod> = pairs
            .iter()
            .enumerate()
            .map(|(i, (c, s))| {
                PreparedMethod::new(&RawPair {
                    id: i.to_string(),
                    project: "p".into(),
                    code: (*c).into(),
                    summary: (*s).into(),
                })
                .unwrap()
            })
            .collect();
        let v = build_vocab(&prepared, VocabCaps { src: 100, tgt: 100 }).unwrap();
        let dims = LayerDims {
            embed_dim: 8,
            hidden_dim: 12,
            src_vocab: v.src.len(),
            tgt_vocab: v.tgt.len(),
            hops: 2,
            code_len: 8,
            ast_len: 12,
            sum_len: 5,
        };
        (prepared.iter().map(|m| encode_example(m, &v, &dims)).collect(), dims)
    }

    #[test]
    fn memorizes_one_example() {
        let (data, dims) = tiny();
        let one = &data[..1];
        let p = ModelParams::build(dims, ModelVariant::CodeGnnGru, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 1,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let out = train(p, one, one, &cfg).unwrap();
        let losses: Vec<f64> = out.history.iter().map(|h| h.train_loss).collect();
        assert!(losses[losses.len() - 1] < losses[0] * 0.1);
        assert_eq!(accuracy(&out.params, one).unwrap(), 1.0);
    }

    #[test]
    fn seeded_runs_match_and_best_epoch_is_a_snapshot() {
        let (data, dims) = tiny();
        let p = ModelParams::build(dims, ModelVariant::AstAttendGruFlat, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 1,
            learning_rate: 5e-3,
            seed: 4,
            ..TrainConfig::default()
        };
        let a = train(p.clone(), &data, &data[1..], &cfg).unwrap();
        let b = train(p.clone(), &data, &data[1..], &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params.checksum(), b.params.checksum());

        let peak = a.history.iter().map(|h| h.val_acc).fold(f64::MIN, f64::max);
        let first_peak = a.history.iter().find(|h| h.val_acc == peak).unwrap().epoch;
        assert_eq!(a.best_epoch, first_peak);
        let cut = TrainConfig {
            epochs: a.best_epoch,
            ..cfg
        };
        let replay = train(p, &data, &data[1..], &cut).unwrap();
        assert_eq!(replay.history.last().unwrap().epoch, a.best_epoch);
        assert_eq!(replay.params.checksum(), a.params.checksum());
    }

    #[test]
    fn single_epoch_is_best() {
        let (data, dims) = tiny();
        let p = ModelParams::build(dims, ModelVariant::CodeGnnGru, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let out = train(p, &data, &data, &cfg).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn bad_config_and_nan_abort() {
        let (data, dims) = tiny();
        let p = ModelParams::build(dims, ModelVariant::CodeGnnGru, 0).unwrap();
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(p.clone(), &data, &data, &bad).is_err());
        assert!(train(p.clone(), &[], &data, &TrainConfig::default()).is_err());

        let mut broken = p;
        let v = broken.dims.tgt_vocab;
        let huge = (0..v).map(|i| if i % 2 == 0 { 1.7e308 } else { -1.7e308 }).collect();
        broken.set("out_dense.b", Tensor::vector(huge)).unwrap();
        let err = train(broken, &data, &data, &TrainConfig::default()).unwrap_err();
        match err {
            ModelError::NonFinite { epoch, batch, ids, .. } => {
                assert_eq!((epoch, batch), (1, 1));
                assert!(!ids.is_empty());
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let dims = LayerDims {
            embed_dim: 2,
            hidden_dim: 2,
            src_vocab: 5,
            tgt_vocab: 5,
            hops: 1,
            code_len: 2,
            ast_len: 2,
            sum_len: 2,
        };
        let mut p = ModelParams::build(dims, ModelVariant::CodeGnnGru, 0).unwrap();
        let before = p.get("ctx_dense.b").unwrap().clone();
        let mut grads = BTreeMap::new();
        grads.insert("ctx_dense.b".to_string(), Tensor::vector(vec![3.0, -0.5]));
        let mut opt = Adam::new(0.1);
        opt.step(&mut p, &grads);
        let after = p.get("ctx_dense.b").unwrap();
        let moved: Vec<f64> = after.data().iter().zip(before.data()).map(|(a, b)| a - b).collect();
        assert!((moved[0] + 0.1).abs() < 1e-6 && (moved[1] - 0.1).abs() < 1e-6);
    }
}
