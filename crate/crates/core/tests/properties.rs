mod common;

use std::collections::BTreeSet;

use astsumm::data::{build_adjacency, parse_method, sbt_flatten, split_by_project, RawPair, SplitRatios};
use astsumm::metrics::{bleu, rouge_lcs_f1, rouge_pair};
use astsumm::model::{checkpoint_json, parse_checkpoint, ModelParams, ModelVariant};
use astsumm::pipeline::Profile;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sentence() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..5, 0..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_programs_form_breadth_first_trees(seed in any::<u64>(), cap in 1usize..120) {
        let src = common::random_program(&mut ChaCha8Rng::seed_from_u64(seed));
        let ast = parse_method(&src).unwrap();
        prop_assert_eq!(sbt_flatten(&ast).len(), 4 * ast.len());
        for i in 1..ast.len() {
            let p = ast.parent(i).unwrap();
            prop_assert!(p < i);
            prop_assert!(ast.children(p).contains(&i));
        }
        let adj = build_adjacency(&ast, cap);
        let kept = ast.len().min(cap);
        prop_assert_eq!(adj.len(), kept);
        prop_assert_eq!(adj.edge_count(), kept - 1);
        let dist = common::bfs_distances(kept, &(1..kept).map(|i| (ast.parent(i).unwrap(), i)).collect::<Vec<_>>());
        prop_assert!(dist[0].iter().all(|&d| d < usize::MAX));
    }

    #[test]
    fn sbt_parentheses_balance(seed in any::<u64>()) {
        let src = common::random_program(&mut ChaCha8Rng::seed_from_u64(seed));
        let sbt = sbt_flatten(&parse_method(&src).unwrap());
        let mut depth = 0i64;
        for t in &sbt {
            match t.as_str() {
                "(" => depth += 1,
                ")" => depth -= 1,
                _ => {}
            }
            prop_assert!(depth >= 0);
        }
        prop_assert_eq!(depth, 0);
    }

    #[test]
    fn projects_never_straddle_splits(
        projects in prop::collection::vec(1usize..6, 3..12),
        seed in any::<u64>(),
    ) {
        let pairs: Vec<RawPair> = projects
            .iter()
            .enumerate()
            .flat_map(|(p, &n)| {
                (0..n).map(move |i| RawPair {
                    id: format!("p{p}-{i}"),
                    project: format!("p{p}"),
                    code: "int f() { return 1; }".into(),
                    summary: "returns one".into(),
                })
            })
            .collect();
        let splits = split_by_project(&pairs, SplitRatios::default(), seed).unwrap();
        let sets: Vec<BTreeSet<&str>> =
            splits.iter().map(|s| s.iter().map(|p| p.project.as_str()).collect()).collect();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            prop_assert!(sets[a].is_disjoint(&sets[b]));
        }
        prop_assert!(sets.iter().all(|s| !s.is_empty()));
        prop_assert_eq!(splits.iter().map(Vec::len).sum::<usize>(), pairs.len());
    }

    #[test]
    fn scores_are_bounded_and_rouge_is_symmetric(
        pairs in prop::collection::vec((sentence(), sentence()), 1..6),
    ) {
        let cands: Vec<Vec<u8>> = pairs.iter().map(|p| p.0.clone()).collect();
        let refs: Vec<Vec<u8>> = pairs.iter().map(|p| p.1.clone()).collect();
        let b = bleu(&cands, &refs, 4).unwrap();
        prop_assert!((0.0..=100.0).contains(&b.bleu_a));
        prop_assert!(b.precisions.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!((0.0..=1.0).contains(&b.brevity_penalty));
        let r = rouge_lcs_f1(&cands, &refs).unwrap();
        prop_assert!((0.0..=100.0).contains(&r));
        for (c, rf) in &pairs {
            prop_assert_eq!(rouge_pair(c, rf), rouge_pair(rf, c));
        }
    }

    #[test]
    fn rouge_mean_ignores_pair_order(
        pairs in prop::collection::vec((sentence(), sentence()), 1..8),
        rot in 0usize..8,
    ) {
        let mut rotated = pairs.clone();
        rotated.rotate_left(rot % pairs.len());
        let split = |v: &[(Vec<u8>, Vec<u8>)]| -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
            (v.iter().map(|p| p.0.clone()).collect(), v.iter().map(|p| p.1.clone()).collect())
        };
        let (c1, r1) = split(&pairs);
        let (c2, r2) = split(&rotated);
        prop_assert_eq!(rouge_lcs_f1(&c1, &r1).unwrap(), rouge_lcs_f1(&c2, &r2).unwrap());
        prop_assert_eq!(bleu(&c1, &r1, 4).unwrap(), bleu(&c2, &r2, 4).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn checkpoints_round_trip_exactly(seed in any::<u64>(), flat in any::<bool>(), hops in 1usize..4) {
        let mut dims = Profile::Desk.dims(40, 20);
        dims.hops = hops;
        let variant = if flat { ModelVariant::AstAttendGruFlat } else { ModelVariant::CodeGnnGru };
        let params = ModelParams::build(dims, variant, seed).unwrap();
        let text = checkpoint_json(&params).unwrap();
        let back = parse_checkpoint(&text).unwrap();
        prop_assert_eq!(back.checksum(), params.checksum());
        prop_assert!(back == params);
        prop_assert_eq!(checkpoint_json(&back).unwrap(), text);
    }
}
