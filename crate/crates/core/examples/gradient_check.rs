//! Runs the finite-difference certification over every layer and both
//! miniature models, then prints one row per checked argument.

use std::time::Instant;

use astsumm::certify::{gradcheck_suite, suite_table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let start = Instant::now();
    let entries = gradcheck_suite(seed)?;
    print!("{}", suite_table(&entries));
    let failed = entries.iter().filter(|e| !e.report.passed).count();
    println!("{} checks, {failed} failed, {:.2?}", entries.len(), start.elapsed());
    Ok(())
}
