//! Trains briefly on the bundled corpus, writes the attention dump of one
//! method and prints which code token each output word attends to most.
//!
//!     cargo run --release --example attention_export -- [out.json]

use astsumm::data::{build_vocab, desk_corpus, encode_example, PreparedMethod};
use astsumm::model::{export_attention, train, ModelParams, ModelVariant};
use astsumm::pipeline::Profile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_path = std::env::args().nth(1).unwrap_or_else(|| "attention.json".into());
    let prepared = desk_corpus()
        .iter()
        .map(PreparedMethod::new)
        .collect::<Result<Vec<_>, _>>()?;
    let vocabs = build_vocab(&prepared, Profile::Desk.caps())?;
    let dims = Profile::Desk.dims(vocabs.src.len(), vocabs.tgt.len());
    let data: Vec<_> = prepared.iter().map(|m| encode_example(m, &vocabs, &dims)).collect();

    let mut cfg = Profile::Desk.train_config();
    cfg.epochs = 30;
    let params = ModelParams::build(dims, ModelVariant::CodeGnnGru, cfg.seed)?;
    let trained = train(params, &data, &data, &cfg)?.params;

    let dump = export_attention(&trained, &data[0], &vocabs, out_path.as_ref())?;
    println!("{} -> {}", dump.example_id, out_path);
    for (word, col) in dump.decoded_tokens.iter().zip(dump.code_argmax()) {
        println!("{word:>12}  attends to code token `{}`", dump.code_tokens[col]);
    }
    Ok(())
}
