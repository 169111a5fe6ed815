//! From raw method/comment pairs to padded id sequences, AST graphs and
//! training rows.

mod ast;
mod parser;
mod sbt;
mod split;
mod tokenize;
mod vocab;

pub use ast::{Kind, MethodAst, NodeKind};
pub use parser::parse_method;
pub use sbt::{build_adjacency, sbt_flatten};
pub use split::{split_by_project, SplitRatios};
pub use tokenize::{split_camel, tokenize, TokenizeMode};
pub use vocab::{Vocabulary, END, PAD, START, UNK};

use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Adjacency;
use crate::layers::LayerDims;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("invalid AST: {reason}")]
    InvalidAst { reason: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("project-level split needs at least 3 projects, found {found}")]
    TooFewProjects { found: usize },
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One method and the first sentence of its documentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPair {
    pub id: String,
    pub project: String,
    pub code: String,
    pub summary: String,
}

/// Reads a JSON-lines corpus; blank lines are skipped.
pub fn read_corpus(reader: impl BufRead) -> Result<Vec<RawPair>, DataError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: RawPair = serde_json::from_str(&line).map_err(|e| DataError::Corpus {
            line: i + 1,
            message: e.to_string(),
        })?;
        if pair.code.trim().is_empty() || pair.summary.trim().is_empty() {
            return Err(DataError::Corpus {
                line: i + 1,
                message: format!("pair {} has an empty code or summary field", pair.id),
            });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

const DESK_CORPUS: &str = include_str!("../../data/desk_corpus.jsonl");

/// The bundled 60-method corpus spread over 6 projects.
pub fn desk_corpus() -> Vec<RawPair> {
    read_corpus(DESK_CORPUS.as_bytes()).expect("bundled corpus is well formed")
}

/// Tokenized and parsed form of a [`RawPair`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedMethod {
    pub id: String,
    pub project: String,
    pub code_tokens: Vec<String>,
    pub ast: MethodAst,
    pub sbt: Vec<String>,
    pub summary_tokens: Vec<String>,
}

impl PreparedMethod {
    pub fn new(pair: &RawPair) -> Result<Self, DataError> {
        let ast = parse_method(&pair.code)?;
        let sbt = sbt_flatten(&ast);
        Ok(Self {
            id: pair.id.clone(),
            project: pair.project.clone(),
            code_tokens: tokenize(&pair.code, TokenizeMode::Code),
            sbt,
            ast,
            summary_tokens: tokenize(&pair.summary, TokenizeMode::Summary),
        })
    }

    /// Source-side tokens sharing the embedding: code tokens, AST node
    /// labels and flattened-AST tokens.
    pub fn source_tokens(&self) -> impl Iterator<Item = &str> {
        self.code_tokens
            .iter()
            .chain(self.ast.labels())
            .chain(&self.sbt)
            .map(String::as_str)
    }
}

/// Size limits for the two vocabularies (excluding reserved ids).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabCaps {
    pub src: usize,
    pub tgt: usize,
}

impl VocabCaps {
    pub const PAPER: VocabCaps = VocabCaps {
        src: 10904,
        tgt: 9996,
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabs {
    pub src: Vocabulary,
    pub tgt: Vocabulary,
}

impl Vocabs {
    /// Percentage of summary words that also occur on the source side.
    pub fn overlap_percent(&self) -> f64 {
        let src: BTreeSet<&str> = self.src.words().collect();
        let tgt: Vec<&str> = self.tgt.words().collect();
        if tgt.is_empty() {
            return 0.0;
        }
        let shared = tgt.iter().filter(|w| src.contains(*w)).count();
        100.0 * shared as f64 / tgt.len() as f64
    }
}

/// Shared source vocabulary over code tokens and AST labels; separate
/// summary vocabulary.
pub fn build_vocab(methods: &[PreparedMethod], caps: VocabCaps) -> Result<Vocabs, DataError> {
    if methods.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let src = Vocabulary::build(methods.iter().flat_map(PreparedMethod::source_tokens), caps.src);
    let tgt = Vocabulary::build(
        methods.iter().flat_map(|m| m.summary_tokens.iter().map(String::as_str)),
        caps.tgt,
    );
    Ok(Vocabs { src, tgt })
}

/// Model-ready form of one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedMethod {
    pub id: String,
    pub project: String,
    /// `code_len` ids, right-padded.
    pub code_ids: Vec<usize>,
    /// `ast_len` node label ids in breadth-first order, right-padded.
    pub ast_ids: Vec<usize>,
    /// Edges among the kept (unpadded) AST nodes.
    pub adjacency: Adjacency,
    /// `ast_len` flattened-AST ids, right-padded.
    pub sbt_ids: Vec<usize>,
    /// Summary ids without start/end markers, at most `sum_len - 1`.
    pub summary_ids: Vec<usize>,
}

/// One training row: predict `target` from the summary `prefix`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample<'a> {
    pub method: &'a EncodedMethod,
    /// Starts with [`START`]; unpadded.
    pub prefix: Vec<usize>,
    pub target: usize,
}

impl EncodedExample<'_> {
    pub fn padded_prefix(&self, sum_len: usize) -> Vec<usize> {
        pad(&self.prefix, sum_len)
    }
}

impl EncodedMethod {
    /// One row per summary position plus the end marker.
    pub fn rows(&self) -> Vec<EncodedExample<'_>> {
        (0..=self.summary_ids.len())
            .map(|k| {
                let mut prefix = Vec::with_capacity(k + 1);
                prefix.push(START);
                prefix.extend_from_slice(&self.summary_ids[..k]);
                EncodedExample {
                    method: self,
                    prefix,
                    target: self.summary_ids.get(k).copied().unwrap_or(END),
                }
            })
            .collect()
    }

    /// Number of real (unpadded) AST nodes.
    pub fn ast_nodes(&self) -> usize {
        self.adjacency.len()
    }
}

pub(crate) fn pad(ids: &[usize], len: usize) -> Vec<usize> {
    let mut out: Vec<usize> = ids.iter().copied().take(len).collect();
    out.resize(len, PAD);
    out
}

/// Pads and truncates every input to `dims`.
pub fn encode_example(method: &PreparedMethod, vocabs: &Vocabs, dims: &LayerDims) -> EncodedMethod {
    let code_ids = pad(&vocabs.src.encode(&method.code_tokens), dims.code_len);
    let ast_ids = pad(&vocabs.src.encode(method.ast.labels()), dims.ast_len);
    let sbt_ids = pad(&vocabs.src.encode(&method.sbt), dims.ast_len);
    let max_summary = dims.sum_len.saturating_sub(1);
    let summary_ids = vocabs
        .tgt
        .encode(&method.summary_tokens)
        .into_iter()
        .take(max_summary)
        .collect();
    EncodedMethod {
        id: method.id.clone(),
        project: method.project.clone(),
        code_ids,
        ast_ids,
        adjacency: build_adjacency(&method.ast, dims.ast_len),
        sbt_ids,
        summary_ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, project: &str, code: &str, summary: &str) -> RawPair {
        RawPair {
            id: id.into(),
            project: project.into(),
            code: code.into(),
            summary: summary.into(),
        }
    }

    fn prep(code: &str, summary: &str) -> PreparedMethod {
        PreparedMethod::new(&pair("a", "p", code, summary)).unwrap()
    }

    #[test]
    fn desk_corpus_parses() {
        let pairs = desk_corpus();
        assert_eq!(pairs.len(), 60);
        let projects: BTreeSet<_> = pairs.iter().map(|p| p.project.as_str()).collect();
        assert_eq!(projects.len(), 6);
        let codes: BTreeSet<_> = pairs.iter().map(|p| p.code.as_str()).collect();
        assert_eq!(codes.len(), 60);
        for p in &pairs {
            let m = PreparedMethod::new(p).unwrap_or_else(|e| panic!("{}: {e}", p.id));
            assert!(m.summary_tokens.len() < 13);
        }
    }

    #[test]
    fn reads_jsonl() {
        let text = r#"{"id":"1","project":"p","code":"void f() {}","summary":"does f"}

{"id":"2","project":"q","code":"void g() {}","summary":"does g"}
"#;
        let pairs = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].project, "q");
        let bad = "{\"id\":1}\n";
        assert!(matches!(read_corpus(bad.as_bytes()), Err(DataError::Corpus { line: 1, .. })));
    }

    #[test]
    fn shared_token_gets_independent_ids() {
        let m = prep("void sendGuess(String guess) { send(guess); }", "sends the guess");
        let v = build_vocab(&[m], VocabCaps { src: 100, tgt: 100 }).unwrap();
        assert!(v.src.get("guess").is_some());
        assert!(v.tgt.get("guess").is_some());
        assert!(v.overlap_percent() > 0.0 && v.overlap_percent() <= 100.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            build_vocab(&[], VocabCaps { src: 1, tgt: 1 }),
            Err(DataError::EmptyCorpus)
        ));
    }

    #[test]
    fn vocab_is_deterministic() {
        let ms = vec![
            prep("int getX() { return x; }", "returns x"),
            prep("void setX(int v) { x = v; }", "sets x"),
        ];
        let caps = VocabCaps { src: 50, tgt: 50 };
        assert_eq!(build_vocab(&ms, caps).unwrap(), build_vocab(&ms, caps).unwrap());
    }

    #[test]
    fn prefix_expansion() {
        let m = prep("int getX() { return x; }", "returns the x value");
        let v = build_vocab(std::slice::from_ref(&m), VocabCaps { src: 50, tgt: 50 }).unwrap();
        let dims = LayerDims::desk(v.src.len(), v.tgt.len());
        let e = encode_example(&m, &v, &dims);
        let rows = e.rows();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0].prefix, [START]);
        assert_eq!(rows[4].target, END);
        assert_eq!(rows[4].prefix.len(), 5);
        assert_eq!(rows[1].padded_prefix(dims.sum_len).len(), dims.sum_len);
    }

    #[test]
    fn unknown_tokens_and_truncation() {
        let m = prep("int getX() { return x; }", "returns x");
        let other = prep("void run() {}", "runs");
        let v = build_vocab(&[other], VocabCaps { src: 50, tgt: 50 }).unwrap();
        let dims = LayerDims::desk(v.src.len(), v.tgt.len());
        let e = encode_example(&m, &v, &dims);
        assert!(e.code_ids.iter().take(m.code_tokens.len()).all(|&i| i >= UNK));
        assert_eq!(e.summary_ids, [UNK, UNK]);

        let body: String = (0..200).map(|i| format!("a{i} = {i};")).collect();
        let long = prep(&format!("void f() {{ {body} }}"), "long method");
        let v = build_vocab(std::slice::from_ref(&long), VocabCaps { src: 5000, tgt: 50 }).unwrap();
        let e = encode_example(&long, &v, &dims);
        assert_eq!(e.code_ids.len(), 30);
        assert_eq!(e.code_ids, v.src.encode(&long.code_tokens[..30]));
        assert_eq!(e.ast_nodes(), dims.ast_len);
        assert_eq!(e.adjacency.edge_count(), dims.ast_len - 1);
    }

    #[test]
    fn padding_only_trails() {
        let m = prep("int getX() { return x; }", "returns x");
        let v = build_vocab(std::slice::from_ref(&m), VocabCaps { src: 50, tgt: 50 }).unwrap();
        let dims = LayerDims::desk(v.src.len(), v.tgt.len());
        let e = encode_example(&m, &v, &dims);
        for ids in [&e.code_ids, &e.ast_ids, &e.sbt_ids] {
            let first_pad = ids.iter().position(|&i| i == PAD).unwrap_or(ids.len());
            assert!(ids[first_pad..].iter().all(|&i| i == PAD));
            assert!(ids.iter().all(|&i| i < v.src.len()));
        }
    }
}
