use super::ast::MethodAst;
use crate::graph::Adjacency;

/// Structure-based traversal: `SBT(n) = ( label SBT(c1) .. SBT(ck) ) label`.
///
/// Every node contributes exactly four tokens.
pub fn sbt_flatten(ast: &MethodAst) -> Vec<String> {
    let mut out = Vec::with_capacity(4 * ast.len());
    // explicit stack: (node, closing?)
    let mut stack = vec![(ast.root(), false)];
    while let Some((n, closing)) = stack.pop() {
        let label = ast.sbt_label(n);
        if closing {
            out.push(")".to_string());
            out.push(label);
        } else {
            out.push("(".to_string());
            out.push(label);
            stack.push((n, true));
            for &c in ast.children(n).iter().rev() {
                stack.push((c, false));
            }
        }
    }
    out
}

/// Parent-child edges among the first `max_nodes` nodes (breadth-first
/// numbering keeps the kept prefix connected).
pub fn build_adjacency(ast: &MethodAst, max_nodes: usize) -> Adjacency {
    let n = ast.len().min(max_nodes);
    let mut lists = vec![Vec::new(); n];
    for (child, list) in lists.iter_mut().enumerate().skip(1) {
        if let Some(p) = ast.parent(child) {
            list.push(p);
        }
    }
    for child in 1..n {
        if let Some(p) = ast.parent(child) {
            lists[p].push(child);
        }
    }
    Adjacency::new(lists).expect("tree edges are symmetric")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ast::{Kind, NodeKind};
    use crate::data::parse_method;

    fn tree(labels: &[&str], children: Vec<Vec<usize>>) -> MethodAst {
        let kinds = labels
            .iter()
            .map(|l| Kind::from_label(l).map_or(NodeKind::Token, NodeKind::Structural))
            .collect();
        MethodAst::from_children(labels.iter().map(|s| s.to_string()).collect(), kinds, children, 0).unwrap()
    }

    #[test]
    fn single_node() {
        let ast = tree(&["name"], vec![vec![]]);
        assert_eq!(sbt_flatten(&ast), ["(", "name", ")", "name"]);
        assert!(build_adjacency(&ast, 10).lists().iter().all(Vec::is_empty));
    }

    #[test]
    fn root_with_two_leaves() {
        let ast = tree(&["block", "expr", "return"], vec![vec![1, 2], vec![], vec![]]);
        assert_eq!(
            sbt_flatten(&ast),
            ["(", "block", "(", "expr", ")", "expr", "(", "return", ")", "return", ")", "block"]
        );
    }

    #[test]
    fn token_leaves_use_composite_labels() {
        let ast = parse_method("void sendGuess() {}").unwrap();
        let sbt = sbt_flatten(&ast);
        assert!(sbt.contains(&"name_send".to_string()));
        assert!(sbt.contains(&"name_void".to_string()));
        assert_eq!(sbt.len(), 4 * ast.len());
    }

    #[test]
    fn function_neighbors() {
        let ast = parse_method("public void f() { x = 1; }").unwrap();
        let adj = build_adjacency(&ast, 1000);
        let mut n: Vec<&str> = adj.neighbors(0).iter().map(|&i| ast.label(i)).collect();
        n.sort_unstable();
        assert_eq!(n, ["block", "name", "parameter_list", "specifier", "type"]);
        assert_eq!(adj.edge_count(), ast.len() - 1);
    }

    #[test]
    fn truncation_keeps_a_prefix_tree() {
        let ast = parse_method("int f(int a, int b) { int c = a + b; return c * 2; }").unwrap();
        let adj = build_adjacency(&ast, 7);
        assert_eq!(adj.len(), 7);
        assert_eq!(adj.edge_count(), 6);
    }
}
