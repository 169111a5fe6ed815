use astsumm::data::{build_vocab, desk_corpus, encode_example, EncodedMethod, PreparedMethod, Vocabs, PAD, START};
use astsumm::model::{greedy_decode, train, ModelInput, ModelParams, ModelVariant};
use astsumm::pipeline::Profile;

fn corpus() -> (Vocabs, Vec<EncodedMethod>) {
    let prepared: Vec<_> = desk_corpus().iter().map(|p| PreparedMethod::new(p).unwrap()).collect();
    let vocabs = build_vocab(&prepared, Profile::Desk.caps()).unwrap();
    let dims = Profile::Desk.dims(vocabs.src.len(), vocabs.tgt.len());
    let methods = prepared.iter().map(|m| encode_example(m, &vocabs, &dims)).collect();
    (vocabs, methods)
}

fn reference(m: &EncodedMethod) -> Vec<usize> {
    m.summary_ids.iter().copied().filter(|&t| t != PAD).collect()
}

#[test]
fn single_pair_is_memorized_exactly() {
    let (vocabs, methods) = corpus();
    let one = &methods[13..14];
    let dims = Profile::Desk.dims(vocabs.src.len(), vocabs.tgt.len());
    for variant in [ModelVariant::CodeGnnGru, ModelVariant::AstAttendGruFlat] {
        let mut cfg = Profile::Desk.train_config();
        cfg.epochs = 40;
        let params = train(ModelParams::build(dims, variant, 3).unwrap(), one, one, &cfg).unwrap().params;
        let ids = greedy_decode(&params, ModelInput::from_method(&one[0], variant), dims.sum_len).unwrap();
        assert_eq!(vocabs.tgt.decode(&ids), vocabs.tgt.decode(&reference(&one[0])), "{variant}");
    }
}

#[test]
fn untrained_decodes_respect_the_contract() {
    let (vocabs, methods) = corpus();
    let dims = Profile::Desk.dims(vocabs.src.len(), vocabs.tgt.len());
    for (seed, variant) in [(0, ModelVariant::CodeGnnGru), (1, ModelVariant::AstAttendGruFlat)] {
        let params = ModelParams::build(dims, variant, seed).unwrap();
        for m in methods.iter().step_by(7) {
            for max_len in [0, 1, 5, dims.sum_len] {
                let ids = greedy_decode(&params, ModelInput::from_method(m, variant), max_len).unwrap();
                assert!(ids.len() <= max_len);
                assert!(!ids.contains(&PAD) && !ids.contains(&START));
            }
        }
        let too_long = greedy_decode(&params, ModelInput::from_method(&methods[0], variant), dims.sum_len + 1);
        assert!(too_long.is_err());
    }
}

#[test]
fn variants_share_code_and_decoder_initialization() {
    let dims = Profile::Desk.dims(50, 30);
    let gnn = ModelParams::build(dims, ModelVariant::CodeGnnGru, 9).unwrap();
    let flat = ModelParams::build(dims, ModelVariant::AstAttendGruFlat, 9).unwrap();
    let shared: Vec<&str> = gnn.names().filter(|n| flat.get(n).is_some()).collect();
    assert!(shared.iter().any(|n| n.starts_with("decoder_gru")));
    assert!(shared.iter().any(|n| n.starts_with("encoder_gru")));
    for n in shared {
        if n.starts_with("ctx_dense") || n.starts_with("out_dense") || n.starts_with("ast_") {
            continue;
        }
        assert_eq!(gnn.get(n), flat.get(n), "{n}");
    }
    assert!(gnn.names().any(|n| n.starts_with("ast_gnn.hop")));
    assert!(!flat.names().any(|n| n.starts_with("ast_gnn")));
}
