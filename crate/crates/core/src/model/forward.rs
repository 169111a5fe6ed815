use super::{Binding, Bound, ModelError, ModelParams, ModelVariant};
use crate::autodiff::{Tape, Tensor, Var};
use crate::data::{EncodedMethod, END, PAD, START};
use crate::graph::{Adjacency, Aggregation};
use crate::layers::{attention, convgnn_stack, dense, embed, gru_forward, gru_sequence, Activation, LayerDims};

/// Encoder-side inputs of one method, already padded to the model dims.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub code_ids: &'a [usize],
    /// Node label ids for the graph variant, flattened-AST ids otherwise.
    pub ast_ids: &'a [usize],
    /// Ignored by the flat variant.
    pub adjacency: &'a Adjacency,
}

impl<'a> ModelInput<'a> {
    pub fn from_method(m: &'a EncodedMethod, variant: ModelVariant) -> Self {
        Self {
            code_ids: &m.code_ids,
            ast_ids: match variant {
                ModelVariant::CodeGnnGru => &m.ast_ids,
                ModelVariant::AstAttendGruFlat => &m.sbt_ids,
            },
            adjacency: &m.adjacency,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderOutput {
    /// `code_len × hidden`
    pub code_states: Var,
    /// `1 × hidden`; also the decoder's initial state.
    pub code_final: Var,
    /// `ast_len × hidden`
    pub ast_states: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct DecoderOutput {
    /// `B × tgt_vocab`
    pub logits: Var,
    /// `(B·sum_len) × code_len`, row `b·sum_len + t` for prefix `b`, position `t`.
    pub attn_code: Var,
    /// `(B·sum_len) × ast_len`
    pub attn_ast: Var,
    /// `B × hidden`
    pub decoder_h0: Var,
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), ModelError> {
    if got == want {
        Ok(())
    } else {
        Err(ModelError::Input(format!("{what} has length {got}, expected {want}")))
    }
}

pub fn encode(
    tape: &mut Tape,
    p: &Bound,
    dims: &LayerDims,
    variant: ModelVariant,
    input: ModelInput<'_>,
) -> Result<EncoderOutput, ModelError> {
    check_len("code_ids", input.code_ids.len(), dims.code_len)?;
    check_len("ast_ids", input.ast_ids.len(), dims.ast_len)?;
    let u = dims.hidden_dim;
    let zero = tape.constant(Tensor::zeros(&[1, u]));

    let code = embed(tape, p.shared_embedding, input.code_ids)?;
    let (code_states, code_final) = gru_forward(tape, code, zero, &p.encoder_gru)?;

    let ast = embed(tape, p.shared_embedding, input.ast_ids)?;
    let ast = match (variant, &p.ast_gnn) {
        (ModelVariant::CodeGnnGru, Some(gnn)) => {
            if input.adjacency.len() > dims.ast_len {
                return Err(ModelError::Input(format!(
                    "adjacency covers {} nodes, more than ast_len {}",
                    input.adjacency.len(),
                    dims.ast_len
                )));
            }
            let adj = input.adjacency.padded(dims.ast_len);
            convgnn_stack(tape, ast, &adj, gnn, Aggregation::Sum, Activation::Relu)?
        }
        (ModelVariant::CodeGnnGru, None) => {
            return Err(ModelError::Input("graph variant without ConvGNN parameters".into()));
        }
        (ModelVariant::AstAttendGruFlat, _) => ast,
    };
    let (ast_states, _) = gru_forward(tape, ast, zero, &p.ast_gru)?;
    Ok(EncoderOutput {
        code_states,
        code_final,
        ast_states,
    })
}

/// Right-pads `prefix`, dropping anything after its first pad so later
/// positions cannot leak into the prediction.
fn canonical_prefix(prefix: &[usize], sum_len: usize) -> Result<Vec<usize>, ModelError> {
    let real = prefix.iter().position(|&t| t == PAD).unwrap_or(prefix.len());
    if real > sum_len {
        return Err(ModelError::Input(format!("prefix of {real} tokens exceeds sum_len {sum_len}")));
    }
    let mut out = prefix[..real].to_vec();
    out.resize(sum_len, PAD);
    Ok(out)
}

/// One next-token prediction per prefix, all sharing `enc`.
pub fn decode(
    tape: &mut Tape,
    p: &Bound,
    dims: &LayerDims,
    enc: &EncoderOutput,
    prefixes: &[Vec<usize>],
) -> Result<DecoderOutput, ModelError> {
    let (s, u) = (dims.sum_len, dims.hidden_dim);
    let batch = prefixes.len();
    if batch == 0 {
        return Err(ModelError::Input("empty prefix batch".into()));
    }
    let rows = prefixes
        .iter()
        .map(|q| canonical_prefix(q, s))
        .collect::<Result<Vec<_>, _>>()?;

    let mut inputs = Vec::with_capacity(s);
    for t in 0..s {
        let ids: Vec<usize> = rows.iter().map(|r| r[t]).collect();
        inputs.push(embed(tape, p.decoder_embedding, &ids)?);
    }
    let h0 = tape.gather_rows(enc.code_final, &vec![0; batch])?;
    let states = gru_sequence(tape, &inputs, h0, &p.decoder_gru)?;
    let flat = tape.concat(&states)?;
    let dec = tape.reshape(flat, &[batch * s, u])?;

    let (code_ctx, attn_code) = attention(tape, dec, enc.code_states)?;
    let (ast_ctx, attn_ast) = attention(tape, dec, enc.ast_states)?;
    let context = tape.concat(&[code_ctx, ast_ctx, dec])?;
    let context = dense(tape, context, &p.ctx_dense, Activation::Relu)?;
    let context = tape.reshape(context, &[batch, s * u])?;
    let logits = dense(tape, context, &p.out_dense, Activation::Identity)?;
    Ok(DecoderOutput {
        logits,
        attn_code,
        attn_ast,
        decoder_h0: h0,
    })
}

/// Result of a single-prefix forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    /// `sum_len × code_len`
    pub attn_code: Tensor,
    /// `sum_len × ast_len`
    pub attn_ast: Tensor,
    pub code_final: Vec<f64>,
    pub decoder_h0: Vec<f64>,
}

/// Next-token logits for one right-padded prefix.
pub fn forward(params: &ModelParams, input: ModelInput<'_>, prefix: &[usize]) -> Result<ForwardOutput, ModelError> {
    check_len("prefix", prefix.len(), params.dims.sum_len)?;
    let mut tape = Tape::new();
    let p = params.bind(&mut tape, Binding::Frozen)?;
    let enc = encode(&mut tape, &p, &params.dims, params.variant, input)?;
    let out = decode(&mut tape, &p, &params.dims, &enc, &[prefix.to_vec()])?;
    Ok(ForwardOutput {
        logits: tape.value(out.logits).data().to_vec(),
        attn_code: tape.value(out.attn_code).clone(),
        attn_ast: tape.value(out.attn_ast).clone(),
        code_final: tape.value(enc.code_final).data().to_vec(),
        decoder_h0: tape.value(out.decoder_h0).data().to_vec(),
    })
}

/// Index of the largest entry; ties go to the lowest index. Pad and start
/// are never predicted.
pub(crate) fn argmax_token(row: &[f64]) -> usize {
    let mut best = END;
    for (i, &v) in row.iter().enumerate() {
        if i == PAD || i == START {
            continue;
        }
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `(code weights, ast weights)` for each decode step.
pub(crate) type AttentionRows = Vec<(Vec<f64>, Vec<f64>)>;

/// Greedy decode plus, for every emitted step, the attention rows of the
/// decoder position that produced it.
pub(crate) fn greedy_with_attention(
    params: &ModelParams,
    input: ModelInput<'_>,
    max_len: usize,
) -> Result<(Vec<usize>, AttentionRows), ModelError> {
    let dims = &params.dims;
    if max_len > dims.sum_len {
        return Err(ModelError::Input(format!("max_len {max_len} exceeds sum_len {}", dims.sum_len)));
    }
    let mut tape = Tape::new();
    let p = params.bind(&mut tape, Binding::Frozen)?;
    let enc = encode(&mut tape, &p, dims, params.variant, input)?;
    let mut out = Vec::new();
    let mut attn = Vec::new();
    while out.len() < max_len {
        let mut prefix = vec![START];
        prefix.extend_from_slice(&out);
        let pos = prefix.len() - 1;
        let d = decode(&mut tape, &p, dims, &enc, &[prefix])?;
        let next = argmax_token(tape.value(d.logits).row(0));
        attn.push((
            tape.value(d.attn_code).row(pos).to_vec(),
            tape.value(d.attn_ast).row(pos).to_vec(),
        ));
        if next == END {
            break;
        }
        out.push(next);
    }
    Ok((out, attn))
}

/// Repeatedly appends the highest-scoring token until the end marker or
/// `max_len` tokens.
pub fn greedy_decode(params: &ModelParams, input: ModelInput<'_>, max_len: usize) -> Result<Vec<usize>, ModelError> {
    greedy_with_attention(params, input, max_len).map(|(ids, _)| ids)
}
