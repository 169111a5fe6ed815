use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checkpoint::write_atomic;
use super::forward::{greedy_with_attention, ModelInput};
use super::{ModelError, ModelParams};
use crate::data::{EncodedMethod, Vocabs, END};

/// Attention rows of the decoder position that produced one output token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionStep {
    /// One weight per `code_tokens` column.
    pub code_weights: Vec<f64>,
    /// One weight per `ast_tokens` column.
    pub ast_weights: Vec<f64>,
}

/// Attention matrices of one greedy decode, with row and column labels.
///
/// `steps[i]` belongs to `decoded_tokens[i]`; the end marker is listed
/// when the decoder emitted it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionDump {
    pub example_id: String,
    pub decoded_tokens: Vec<String>,
    pub code_tokens: Vec<String>,
    /// Node labels for the graph variant, flattened-AST tokens otherwise.
    pub ast_tokens: Vec<String>,
    pub steps: Vec<AttentionStep>,
}

impl AttentionDump {
    pub fn build(params: &ModelParams, method: &EncodedMethod, vocabs: &Vocabs) -> Result<Self, ModelError> {
        let input = ModelInput::from_method(method, params.variant);
        let (ids, rows) = greedy_with_attention(params, input, params.dims.sum_len)?;
        let mut decoded_tokens = vocabs.tgt.decode(&ids);
        if rows.len() > ids.len() {
            decoded_tokens.push(vocabs.tgt.token(END).to_string());
        }
        Ok(Self {
            example_id: method.id.clone(),
            decoded_tokens,
            code_tokens: vocabs.src.decode(input.code_ids),
            ast_tokens: vocabs.src.decode(input.ast_ids),
            steps: rows
                .into_iter()
                .map(|(code_weights, ast_weights)| AttentionStep {
                    code_weights,
                    ast_weights,
                })
                .collect(),
        })
    }

    /// Column with the largest code weight at each step.
    pub fn code_argmax(&self) -> Vec<usize> {
        self.steps
            .iter()
            .map(|s| {
                (0..s.code_weights.len())
                    .fold(0, |best, j| if s.code_weights[j] > s.code_weights[best] { j } else { best })
            })
            .collect()
    }
}

/// Builds the dump for `method` and writes it as JSON to `out_path`.
pub fn export_attention(
    params: &ModelParams,
    method: &EncodedMethod,
    vocabs: &Vocabs,
    out_path: &Path,
) -> Result<AttentionDump, ModelError> {
    let dump = AttentionDump::build(params, method, vocabs)?;
    write_atomic(out_path, serde_json::to_string_pretty(&dump)?.as_bytes())?;
    Ok(dump)
}
