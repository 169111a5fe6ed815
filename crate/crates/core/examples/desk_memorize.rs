//! Trains on the whole bundled corpus and scores greedy decodes against
//! the training summaries.
//!
//!     cargo run --release --example desk_memorize -- [gnn|flat] [epochs] [seed]

use std::time::Instant;

use astsumm::data::{build_vocab, desk_corpus, encode_example, PreparedMethod};
use astsumm::model::{train_observed, ModelParams, ModelVariant};
use astsumm::pipeline::{evaluate, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let variant: ModelVariant = std::env::args().nth(1).as_deref().unwrap_or("gnn").parse()?;
    let epochs: usize = std::env::args().nth(2).map_or(Ok(50), |s| s.parse())?;
    let seed: u64 = std::env::args().nth(3).map_or(Ok(1), |s| s.parse())?;
    let prepared = desk_corpus()
        .iter()
        .map(PreparedMethod::new)
        .collect::<Result<Vec<_>, _>>()?;
    let vocabs = build_vocab(&prepared, Profile::Desk.caps())?;
    let dims = Profile::Desk.dims(vocabs.src.len(), vocabs.tgt.len());
    let data: Vec<_> = prepared.iter().map(|m| encode_example(m, &vocabs, &dims)).collect();
    println!("{} methods, src vocab {}, tgt vocab {}", data.len(), vocabs.src.len(), vocabs.tgt.len());

    let mut cfg = Profile::Desk.train_config();
    cfg.epochs = epochs;
    cfg.seed = seed;
    let start = Instant::now();
    let params = ModelParams::build(dims, variant, cfg.seed)?;
    let out = train_observed(params, &data, &data, &cfg, |r| {
        println!("epoch {:>2}  loss {:.4}  acc {:.4}  ({:.1?})", r.epoch, r.train_loss, r.val_acc, start.elapsed());
    })?;
    println!("best epoch {}", out.best_epoch);
    print!("{}", evaluate(&out.params, &data, &vocabs)?.to_table());
    Ok(())
}
