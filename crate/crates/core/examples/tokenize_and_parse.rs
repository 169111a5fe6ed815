//! Tokenizes a method and its summary, parses it into an AST, and prints
//! the flattened traversal plus the root's neighbors.
//!
//!     cargo run --example tokenize_and_parse -- 'int size() { return count; }'

use astsumm::data::{build_adjacency, parse_method, sbt_flatten, tokenize, TokenizeMode};

const DEFAULT: &str = r#"public void sendGuess(String guess) {
    if (isConnected()) {
        gui.statusBarInfo("Querying...", false);
        os.write((guess + "\r\n").getBytes());
        os.flush();
    }
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let code = std::env::args().nth(1).unwrap_or_else(|| DEFAULT.to_string());
    println!("code tokens:    {:?}", tokenize(&code, TokenizeMode::Code));
    println!(
        "summary tokens: {:?}",
        tokenize("Sends the user's guess to the server.", TokenizeMode::Summary)
    );

    let ast = parse_method(&code)?;
    println!("\n{} AST nodes", ast.len());
    println!("{}", ast.to_sexpr());

    let sbt = sbt_flatten(&ast);
    println!("\nSBT ({} tokens = 4 x {} nodes):", sbt.len(), ast.len());
    println!("{}", sbt.join(" "));

    let adj = build_adjacency(&ast, ast.len());
    let neighbors: Vec<&str> = adj.neighbors(ast.root()).iter().map(|&i| ast.label(i)).collect();
    println!("\nneighbors of `{}`: {:?}", ast.label(ast.root()), neighbors);
    Ok(())
}
