//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

const IDENTS: &[&str] = &["count", "items", "userName", "getValue", "HTMLParser", "x", "idx", "buf", "total2", "os"];
const TYPES: &[&str] = &["int", "String", "boolean", "double", "List<String>", "Map<String, Integer>", "char[]"];
const MODIFIERS: &[&str] = &["public", "private", "static", "final", "synchronized"];
const BINARY: &[&str] = &["+", "-", "*", "/", "%", "==", "!=", "<", ">=", "&&", "||", "&", "|", "^"];
const ASSIGN: &[&str] = &["=", "+=", "-=", "*="];

/// Random Java method drawn from the supported subset.
pub fn random_program(rng: &mut impl Rng) -> String {
    let mut s = String::new();
    let n_modifiers = rng.gen_range(0..3);
    for m in MODIFIERS.choose_multiple(rng, n_modifiers) {
        s.push_str(m);
        s.push(' ');
    }
    if rng.gen_bool(0.3) {
        s.push_str("void");
    } else {
        s.push_str(TYPES.choose(rng).unwrap());
    }
    s.push(' ');
    s.push_str(ident(rng));
    s.push('(');
    let params: Vec<String> = (0..rng.gen_range(0..4))
        .map(|_| format!("{} {}", TYPES.choose(rng).unwrap(), ident(rng)))
        .collect();
    s.push_str(&params.join(", "));
    s.push(')');
    if rng.gen_bool(0.2) {
        s.push_str(" throws IOException");
    }
    s.push(' ');
    block(rng, 0, &mut s);
    s
}

fn ident(rng: &mut impl Rng) -> &'static str {
    IDENTS.choose(rng).unwrap()
}

fn block(rng: &mut impl Rng, depth: usize, s: &mut String) {
    s.push_str("{ ");
    let n = if depth > 2 { rng.gen_range(0..2) } else { rng.gen_range(0..4) };
    for _ in 0..n {
        statement(rng, depth + 1, s);
    }
    s.push_str("} ");
}

fn statement(rng: &mut impl Rng, depth: usize, s: &mut String) {
    let nested = depth <= 3;
    match rng.gen_range(0..11) {
        0 => {
            s.push_str(&format!("{} {}", TYPES.choose(rng).unwrap(), ident(rng)));
            if rng.gen_bool(0.7) {
                s.push_str(" = ");
                s.push_str(&expr(rng, 0));
            }
            s.push_str("; ");
        }
        1 if nested => {
            s.push_str(&format!("if ({}) ", expr(rng, 0)));
            block(rng, depth, s);
            if rng.gen_bool(0.4) {
                s.push_str("else ");
                block(rng, depth, s);
            }
        }
        2 if nested => {
            let v = ident(rng);
            s.push_str(&format!("for (int {v} = 0; {v} < {}; {v}++) ", expr(rng, 1)));
            block(rng, depth, s);
        }
        3 if nested => {
            s.push_str(&format!("for (String {} : {}) ", ident(rng), ident(rng)));
            block(rng, depth, s);
        }
        4 if nested => {
            s.push_str(&format!("while ({}) ", expr(rng, 0)));
            block(rng, depth, s);
        }
        5 => {
            if rng.gen_bool(0.5) {
                s.push_str(&format!("return {}; ", expr(rng, 0)));
            } else {
                s.push_str("return; ");
            }
        }
        6 => s.push_str(if rng.gen_bool(0.5) { "break; " } else { "continue; " }),
        7 => s.push_str(&format!("throw new IllegalStateException({}); ", expr(rng, 2))),
        8 => s.push_str(&format!("{}++; ", ident(rng))),
        9 => s.push_str(&format!("{} {} {}; ", lvalue(rng), ASSIGN.choose(rng).unwrap(), expr(rng, 0))),
        _ => s.push_str(&format!("{}; ", call(rng, 1))),
    }
}

fn lvalue(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..3) {
        0 => format!("this.{}", ident(rng)),
        1 => format!("{}[{}]", ident(rng), ident(rng)),
        _ => ident(rng).to_string(),
    }
}

fn call(rng: &mut impl Rng, depth: usize) -> String {
    let args: Vec<String> = (0..rng.gen_range(0..3)).map(|_| expr(rng, depth + 1)).collect();
    let target = match rng.gen_range(0..3) {
        0 => format!("{}.{}", ident(rng), ident(rng)),
        1 => format!("this.{}", ident(rng)),
        _ => ident(rng).to_string(),
    };
    format!("{target}({})", args.join(", "))
}

fn expr(rng: &mut impl Rng, depth: usize) -> String {
    let leaf = depth >= 3;
    match rng.gen_range(0..if leaf { 4 } else { 12 }) {
        0 => rng.gen_range(0..1000).to_string(),
        1 => format!("\"{} {}\"", ident(rng), ident(rng)),
        2 => ["true", "false", "null", "'c'"].choose(rng).unwrap().to_string(),
        3 => ident(rng).to_string(),
        4 | 5 => format!("{} {} {}", expr(rng, depth + 1), BINARY.choose(rng).unwrap(), expr(rng, depth + 1)),
        6 => format!("!{}", expr(rng, depth + 1)),
        7 => call(rng, depth),
        8 => format!("({}).{}()", expr(rng, depth + 1), ident(rng)),
        9 => format!("new ArrayList<String>({})", expr(rng, depth + 1)),
        10 => format!("{} ? {} : {}", expr(rng, depth + 1), expr(rng, depth + 1), expr(rng, depth + 1)),
        _ => format!("{}[{}]", ident(rng), expr(rng, depth + 1)),
    }
}

/// Tree on `n` nodes where node `i > 0` hangs off a random earlier node.
pub fn random_tree_edges(rng: &mut impl Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (rng.gen_range(0..i), i)).collect()
}

/// All-pairs hop distances by breadth-first search from every node.
pub fn bfs_distances(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    (0..n)
        .map(|src| {
            let mut dist = vec![usize::MAX; n];
            dist[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            dist
        })
        .collect()
}

/// Clipped n-gram matches and candidate n-gram total by scanning every
/// window against every other window.
pub fn brute_clipped(cand: &[u8], reference: &[u8], n: usize) -> (usize, usize) {
    if cand.len() < n {
        return (0, 0);
    }
    let windows: Vec<&[u8]> = cand.windows(n).collect();
    let mut matched = 0;
    let mut seen: Vec<&[u8]> = Vec::new();
    for &w in &windows {
        if seen.contains(&w) {
            continue;
        }
        seen.push(w);
        let in_cand = windows.iter().filter(|&&x| x == w).count();
        let in_ref = if reference.len() < n {
            0
        } else {
            reference.windows(n).filter(|&x| x == w).count()
        };
        matched += in_cand.min(in_ref);
    }
    (matched, windows.len())
}

fn is_subsequence(sub: &[u8], seq: &[u8]) -> bool {
    let mut it = seq.iter();
    sub.iter().all(|c| it.any(|s| s == c))
}

/// Longest common subsequence by enumerating every subsequence of `a`.
pub fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    assert!(a.len() <= 16);
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let len = mask.count_ones() as usize;
        if len <= best {
            continue;
        }
        let sub: Vec<u8> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| a[i]).collect();
        if is_subsequence(&sub, b) {
            best = len;
        }
    }
    best
}
