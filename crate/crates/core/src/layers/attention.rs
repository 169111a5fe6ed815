use crate::autodiff::{Tape, TensorError, Var};

/// Unscaled dot-product attention of every decoder row over the encoder
/// rows. Returns `(context Lt×u, weights Lt×Ls)`.
pub fn attention(tape: &mut Tape, decoder: Var, encoder: Var) -> Result<(Var, Var), TensorError> {
    let (dw, ew) = (tape.value(decoder).cols(), tape.value(encoder).cols());
    if dw != ew || tape.shape(decoder).len() != 2 || tape.shape(encoder).len() != 2 {
        return Err(TensorError::ShapeMismatch {
            op: "attention",
            left: tape.shape(decoder).to_vec(),
            right: tape.shape(encoder).to_vec(),
        });
    }
    let keys = tape.transpose(encoder)?;
    let scores = tape.matmul(decoder, keys)?;
    let weights = tape.softmax_rows(scores)?;
    let context = tape.matmul(weights, encoder)?;
    Ok((context, weights))
}
