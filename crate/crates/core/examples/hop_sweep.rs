//! Trains one graph model per hop count on the project split of the
//! bundled corpus and prints the comparison table.
//!
//!     cargo run --release --example hop_sweep -- 1,2,3

use astsumm::data::desk_corpus;
use astsumm::pipeline::{hop_sweep, hop_table, preprocess, PreprocessConfig, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hops: Vec<usize> = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "1,2,3".into())
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let cfg = PreprocessConfig::default();
    let pre = preprocess(&desk_corpus(), &cfg)?;
    print!("{}", pre.stats.to_text());
    let train_cfg = cfg.profile.train_config();
    let rows = hop_sweep(&pre.dataset, &hops, &train_cfg, Split::Test, |k, p| {
        println!("trained hops={k} ({} parameters)", p.parameter_count());
        Ok(())
    })?;
    print!("\n{}", hop_table(&rows));
    Ok(())
}
