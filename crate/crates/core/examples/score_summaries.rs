//! Scores candidate summaries against references with corpus BLEU and
//! ROUGE-LCS.

use astsumm::data::{tokenize, TokenizeMode};
use astsumm::metrics::{bleu, lcs_length, EvalReport};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = [
        ("a", "the cat is on the mat", "the cat sat on the mat"),
        ("b", "returns the number of items", "returns the number of items in the list"),
        ("c", "sends a guess to the server", "sends the guess to the server"),
    ];
    let words = |s: &str| tokenize(s, TokenizeMode::Summary);

    let cands: Vec<_> = pairs.iter().map(|p| words(p.1)).collect();
    let refs: Vec<_> = pairs.iter().map(|p| words(p.2)).collect();
    let scores = bleu(&cands, &refs, 4)?;
    println!("n-gram precisions {:?}", scores.precisions);
    println!("brevity penalty   {:.4}", scores.brevity_penalty);
    println!("LCS of pair a     {}", lcs_length(&cands[0], &refs[0]));

    let rows = pairs.iter().map(|p| (p.0.to_string(), words(p.1), words(p.2))).collect();
    print!("\n{}", EvalReport::from_pairs(rows, None)?.to_table());
    Ok(())
}
