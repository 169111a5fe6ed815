//! Finite-difference certification of every layer and of the full model.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{grad_check, GradCheckReport, Tape, Tensor, TensorError, Var};
use crate::data::{END, PAD, START};
use crate::graph::{Adjacency, Aggregation};
use crate::layers::{
    attention, convgnn_layer, convgnn_stack, dense, embed, gru_forward, gru_sequence, uniform, Activation,
    ConvGnnParams, DenseParams, GruParams, LayerDims,
};
use crate::model::{decode, encode, Binding, ModelInput, ModelParams, ModelVariant};

pub const EPS: f64 = 1e-5;
pub const LAYER_TOL: f64 = 1e-6;
pub const MODEL_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub layer: String,
    /// Which input or parameter was perturbed.
    pub argument: String,
    pub report: GradCheckReport,
}

/// `sum(out ⊙ r)` for a fixed random `r`, so no output coordinate cancels
/// another by symmetry.
fn project(tape: &mut Tape, out: Var, seed: u64) -> Result<Var, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = uniform(&mut rng, tape.shape(out), 1.0);
    let r = tape.constant(r);
    let prod = tape.mul(out, r)?;
    tape.sum(prod)
}

/// Checks `f` with respect to each argument in turn, holding the others
/// fixed as constants.
fn check_args<F>(
    layer: &str,
    names: &[&str],
    args: &[Tensor],
    tol: f64,
    f: F,
) -> Result<Vec<CheckEntry>, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut out = Vec::with_capacity(args.len());
    for (i, name) in names.iter().enumerate() {
        let report = grad_check(
            |tape, x| {
                let vars: Vec<Var> = args
                    .iter()
                    .enumerate()
                    .map(|(j, t)| if j == i { x } else { tape.constant(t.clone()) })
                    .collect();
                let y = f(tape, &vars)?;
                project(tape, y, 0xC0FFEE + i as u64)
            },
            &args[i],
            EPS,
            tol,
        )?;
        out.push(CheckEntry {
            layer: layer.to_string(),
            argument: (*name).to_string(),
            report,
        });
    }
    Ok(out)
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Adjacency {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    Adjacency::from_edges(n, &edges).expect("random tree is valid")
}

fn gru_arg_names() -> Vec<String> {
    GruParams::<Tensor>::NAMES.iter().map(|s| s.to_string()).collect()
}

/// Finite-difference checks of every layer, each argument separately.
pub fn layer_checks(seed: u64) -> Result<Vec<CheckEntry>, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::new();
    let (d, u) = (4, 5);

    let table = uniform(&mut rng, &[7, d], 2.0);
    all.extend(check_args("embedding", &["table"], &[table], LAYER_TOL, |t, v| {
        embed(t, v[0], &[1, 1, 3, 6])
    })?);

    for act in [Activation::Identity, Activation::Tanh, Activation::Relu] {
        let args = [uniform(&mut rng, &[3, d], 2.0), uniform(&mut rng, &[d, u], 1.0), uniform(&mut rng, &[u], 1.0)];
        all.extend(check_args(&format!("dense/{act:?}"), &["x", "w", "b"], &args, LAYER_TOL, |t, v| {
            dense(t, v[0], &DenseParams { w: v[1], b: v[2] }, act)
        })?);
    }

    let mut gru_args = |len: usize| {
        let p = GruParams::init(&mut rng, d, u).map(|w| {
            let mut w = w.clone();
            w.data_mut().iter_mut().for_each(|x| *x *= 2.0);
            w
        });
        let mut args = vec![uniform(&mut rng, &[len, d], 2.0), uniform(&mut rng, &[1, u], 1.0)];
        args.extend(p.fields().into_iter().cloned());
        args
    };
    let mut names = vec!["x".to_string(), "h0".to_string()];
    names.extend(gru_arg_names());
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let gru_params = |v: &[Var]| GruParams::from_fields(std::array::from_fn(|k| v[2 + k]));
    for (label, len) in [("gru step", 1), ("gru sequence", 4)] {
        let args = gru_args(len);
        all.extend(check_args(label, &names, &args, LAYER_TOL, |t, v| {
            let (outputs, _) = gru_forward(t, v[0], v[1], &gru_params(v))?;
            Ok(outputs)
        })?);
    }
    let mut batched = gru_args(2);
    batched[1] = uniform(&mut rng, &[2, u], 1.0);
    batched.push(uniform(&mut rng, &[2, d], 2.0));
    let mut bnames = names.clone();
    bnames.push("x2");
    all.extend(check_args("gru batched", &bnames, &batched, LAYER_TOL, |t, v| {
        let states = gru_sequence(t, &[v[0], v[11]], v[1], &gru_params(v))?;
        t.concat(&states)
    })?);

    let adj = random_tree(&mut rng, 6);
    for (act, mode) in [(Activation::Relu, Aggregation::Sum), (Activation::Tanh, Aggregation::Mean)] {
        let args = [uniform(&mut rng, &[6, d], 2.0), uniform(&mut rng, &[d, d], 1.0), uniform(&mut rng, &[d], 1.0)];
        all.extend(check_args(&format!("convgnn layer/{act:?}/{mode:?}"), &["x", "w", "b"], &args, LAYER_TOL, |t, v| {
            convgnn_layer(t, v[0], &adj, &DenseParams { w: v[1], b: v[2] }, mode, act)
        })?);
    }
    for k in 1..=3 {
        let adj = random_tree(&mut rng, 7);
        let mut args = vec![uniform(&mut rng, &[7, d], 2.0)];
        let mut labels = vec!["x".to_string()];
        for h in 0..k {
            args.push(uniform(&mut rng, &[d, d], 1.0));
            args.push(uniform(&mut rng, &[d], 1.0));
            labels.push(format!("hop{h}.w"));
            labels.push(format!("hop{h}.b"));
        }
        let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
        all.extend(check_args(&format!("convgnn stack k={k}"), &labels, &args, LAYER_TOL, |t, v| {
            let p = ConvGnnParams {
                hops: (0..k).map(|h| DenseParams { w: v[1 + 2 * h], b: v[2 + 2 * h] }).collect(),
            };
            convgnn_stack(t, v[0], &adj, &p, Aggregation::Sum, Activation::Relu)
        })?);
    }

    let args = [uniform(&mut rng, &[3, u], 1.0), uniform(&mut rng, &[4, u], 1.0)];
    all.extend(check_args("attention", &["decoder", "encoder"], &args, LAYER_TOL, |t, v| {
        let (ctx, w) = attention(t, v[0], v[1])?;
        t.concat(&[ctx, w])
    })?);
    Ok(all)
}

/// The miniature configuration used for the end-to-end check.
pub fn miniature_dims() -> LayerDims {
    LayerDims {
        embed_dim: 8,
        hidden_dim: 12,
        src_vocab: 20,
        tgt_vocab: 20,
        hops: 2,
        code_len: 6,
        ast_len: 8,
        sum_len: 5,
    }
}

/// Checks the mean training loss of one random method with respect to
/// every model parameter.
pub fn model_checks(seed: u64, variant: ModelVariant) -> Result<Vec<CheckEntry>, TensorError> {
    let dims = miniature_dims();
    let lift = |e: crate::model::ModelError| match e {
        crate::model::ModelError::Tensor(t) => t,
        other => TensorError::Invalid {
            op: "model",
            reason: other.to_string(),
        },
    };
    let mut params = ModelParams::build(dims, variant, seed).map_err(lift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    // larger-than-init weights so the check is not dominated by near-zero gradients
    let names: Vec<String> = params.names().map(String::from).collect();
    for n in &names {
        let t = params.get(n).expect("registered");
        let noise = uniform(&mut rng, t.shape(), 0.3);
        let bumped = Tensor::new(
            t.shape().to_vec(),
            t.data().iter().zip(noise.data()).map(|(a, b)| a + b).collect(),
        )?;
        params.set(n, bumped).map_err(lift)?;
    }
    let code: Vec<usize> = (0..6).map(|_| rng.gen_range(4..20)).collect();
    let ast: Vec<usize> = (0..8).map(|i| if i < 7 { rng.gen_range(4..20) } else { PAD }).collect();
    let adj = random_tree(&mut rng, 7);
    let summary: Vec<usize> = (0..3).map(|_| rng.gen_range(4..20)).collect();
    let mut prefixes = Vec::new();
    let mut targets = Vec::new();
    for k in 0..=summary.len() {
        let mut p = vec![START];
        p.extend_from_slice(&summary[..k]);
        prefixes.push(p);
        targets.push(summary.get(k).copied().unwrap_or(END));
    }
    let input = ModelInput {
        code_ids: &code,
        ast_ids: &ast,
        adjacency: &adj,
    };
    let mut out = Vec::new();
    for name in &names {
        let report = grad_check(
            |tape, x| {
                let b = params.bind(tape, Binding::Probe { name, var: x }).map_err(lift)?;
                let enc = encode(tape, &b, &dims, variant, input).map_err(lift)?;
                let dec = decode(tape, &b, &dims, &enc, &prefixes).map_err(lift)?;
                let loss = tape.cross_entropy(dec.logits, &targets)?;
                tape.scale(loss, 1.0 / targets.len() as f64)
            },
            params.get(name).expect("registered"),
            EPS,
            MODEL_TOL,
        )?;
        out.push(CheckEntry {
            layer: format!("model/{variant}"),
            argument: name.clone(),
            report,
        });
    }
    Ok(out)
}

/// Every layer check followed by the full model in both variants.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<CheckEntry>, TensorError> {
    let mut all = layer_checks(seed)?;
    all.extend(model_checks(seed, ModelVariant::CodeGnnGru)?);
    all.extend(model_checks(seed, ModelVariant::AstAttendGruFlat)?);
    Ok(all)
}

pub fn suite_table(entries: &[CheckEntry]) -> String {
    let w = entries.iter().map(|e| e.layer.len()).max().unwrap_or(5).max(5);
    let a = entries.iter().map(|e| e.argument.len()).max().unwrap_or(8).max(8);
    let mut s = String::new();
    let _ = writeln!(s, "{:<w$}  {:<a$}  {:>12}  {:>7}  {:>5}  result", "layer", "argument", "max rel err", "checked", "kinks");
    for e in entries {
        let r = &e.report;
        let _ = writeln!(
            s,
            "{:<w$}  {:<a$}  {:>12.3e}  {:>7}  {:>5}  {}",
            e.layer,
            e.argument,
            r.max_rel_err,
            r.checked,
            r.non_comparable.len(),
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_passes() {
        let entries = layer_checks(11).unwrap();
        for e in &entries {
            assert!(e.report.passed, "{} {}: {}", e.layer, e.argument, e.report.max_rel_err);
            assert!(e.report.checked > 0);
        }
        let layers: std::collections::BTreeSet<&str> = entries.iter().map(|e| e.layer.as_str()).collect();
        for want in ["embedding", "gru step", "gru sequence", "attention", "convgnn stack k=3"] {
            assert!(layers.contains(want), "{want}");
        }
    }

    #[test]
    fn table_marks_failures() {
        let mut entries = layer_checks(3).unwrap();
        entries.truncate(1);
        entries[0].report.passed = false;
        assert!(suite_table(&entries).contains("FAIL"));
    }
}
