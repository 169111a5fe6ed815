//! Runs the preprocessing pipeline on a JSONL corpus (or the bundled one),
//! showing the project split and vocabulary sizes.
//!
//!     cargo run --example preprocess_corpus -- [corpus.jsonl]

use std::fs::File;
use std::io::BufReader;

use astsumm::data::{desk_corpus, read_corpus};
use astsumm::pipeline::{preprocess, PreprocessConfig, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = match std::env::args().nth(1) {
        Some(path) => read_corpus(BufReader::new(File::open(path)?))?,
        None => desk_corpus(),
    };
    let pre = preprocess(&pairs, &PreprocessConfig::default())?;
    print!("{}", pre.stats.to_text());
    for (split, raw) in [Split::Train, Split::Val, Split::Test].iter().zip(&pre.raw_splits) {
        let mut projects: Vec<&str> = raw.iter().map(|p| p.project.as_str()).collect();
        projects.dedup();
        println!("{split:?}: {projects:?}");
    }
    let first = &pre.dataset.split(Split::Train)[0];
    println!(
        "\n{}: {} code ids, {} AST nodes, {} decoder rows",
        first.id,
        first.code_ids.len(),
        first.ast_nodes(),
        first.rows().len()
    );
    Ok(())
}
