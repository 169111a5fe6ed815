use astsumm::data::{build_vocab, desk_corpus, encode_example, EncodedMethod, PreparedMethod, Vocabs};
use astsumm::model::{export_attention, train, AttentionDump, ModelParams, ModelVariant};
use astsumm::pipeline::Profile;

fn corpus() -> (Vocabs, Vec<EncodedMethod>) {
    let prepared: Vec<_> = desk_corpus().iter().map(|p| PreparedMethod::new(p).unwrap()).collect();
    let vocabs = build_vocab(&prepared, Profile::Desk.caps()).unwrap();
    let dims = Profile::Desk.dims(vocabs.src.len(), vocabs.tgt.len());
    let methods = prepared.iter().map(|m| encode_example(m, &vocabs, &dims)).collect();
    (vocabs, methods)
}

fn trained(variant: ModelVariant, epochs: usize, methods: &[EncodedMethod], vocabs: &Vocabs) -> ModelParams {
    let dims = Profile::Desk.dims(vocabs.src.len(), vocabs.tgt.len());
    let mut cfg = Profile::Desk.train_config();
    cfg.epochs = epochs;
    cfg.seed = 1;
    train(ModelParams::build(dims, variant, 1).unwrap(), methods, methods, &cfg).unwrap().params
}

#[test]
fn dump_rows_are_distributions_with_matching_labels() {
    let (vocabs, methods) = corpus();
    for variant in [ModelVariant::CodeGnnGru, ModelVariant::AstAttendGruFlat] {
        let params = trained(variant, 2, &methods[..8], &vocabs);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("nested").join("attn.json");
        let dump = export_attention(&params, &methods[3], &vocabs, &path).unwrap();
        let back: AttentionDump = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, dump);
        assert_eq!(dump.steps.len(), dump.decoded_tokens.len());
        assert_eq!(dump.code_tokens.len(), params.dims.code_len);
        for s in &dump.steps {
            assert_eq!(s.code_weights.len(), dump.code_tokens.len());
            assert_eq!(s.ast_weights.len(), dump.ast_tokens.len());
            for row in [&s.code_weights, &s.ast_weights] {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|w| (0.0..=1.0).contains(w)));
            }
        }
    }
}

#[test]
fn export_to_unwritable_path_is_an_error() {
    let (vocabs, methods) = corpus();
    let params = ModelParams::build(
        Profile::Desk.dims(vocabs.src.len(), vocabs.tgt.len()),
        ModelVariant::CodeGnnGru,
        0,
    )
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    assert!(export_attention(&params, &methods[0], &vocabs, &file.join("attn.json")).is_err());
}

/// When an emitted word occurs in the code, the strongest code-attention
/// column should hold that word for most such steps. Measured at 12 of 96
/// steps after 50 epochs; attention mass drifts to trailing padding.
#[test]
#[ignore = "copy-style attention alignment is not reached on the desk corpus"]
fn copy_attention_points_at_the_emitted_word() {
    let (vocabs, methods) = corpus();
    let params = trained(ModelVariant::CodeGnnGru, 50, &methods, &vocabs);
    let (mut hits, mut total) = (0, 0);
    for m in &methods {
        let dump = AttentionDump::build(&params, m, &vocabs).unwrap();
        for (word, col) in dump.decoded_tokens.iter().zip(dump.code_argmax()) {
            if dump.code_tokens.contains(word) {
                total += 1;
                hits += usize::from(&dump.code_tokens[col] == word);
            }
        }
    }
    assert!(2 * hits > total, "{hits} of {total} steps");
}
