use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DataError;

macro_rules! kinds {
    ($($variant:ident => $label:literal),* $(,)?) => {
        /// Structural node kinds, named after their srcML elements.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum Kind { $($variant),* }

        impl Kind {
            pub const ALL: &'static [Kind] = &[$(Kind::$variant),*];

            pub fn label(self) -> &'static str {
                match self { $(Kind::$variant => $label),* }
            }

            pub fn from_label(s: &str) -> Option<Kind> {
                match s { $($label => Some(Kind::$variant),)* _ => None }
            }
        }
    };
}

kinds! {
    Function => "function",
    Specifier => "specifier",
    Type => "type",
    Name => "name",
    ParameterList => "parameter_list",
    Parameter => "parameter",
    Throws => "throws",
    Block => "block",
    DeclStmt => "decl_stmt",
    Decl => "decl",
    Init => "init",
    ExprStmt => "expr_stmt",
    Expr => "expr",
    Call => "call",
    ArgumentList => "argument_list",
    Argument => "argument",
    Operator => "operator",
    Literal => "literal",
    Index => "index",
    Return => "return",
    If => "if",
    Condition => "condition",
    Then => "then",
    Else => "else",
    For => "for",
    Control => "control",
    Incr => "incr",
    Range => "range",
    While => "while",
    Break => "break",
    Continue => "continue",
    Throw => "throw",
    EmptyStmt => "empty_stmt",
}

/// A node is either a structural element or a code-token leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Structural(Kind),
    Token,
}

/// Labeled ordered tree of one method, numbered breadth-first from the
/// root at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodAst {
    labels: Vec<String>,
    kinds: Vec<NodeKind>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl MethodAst {
    /// Validates a tree given in any numbering and renumbers it
    /// breadth-first. `children` order is preserved.
    pub fn from_children(
        labels: Vec<String>,
        kinds: Vec<NodeKind>,
        children: Vec<Vec<usize>>,
        root: usize,
    ) -> Result<Self, DataError> {
        let n = labels.len();
        let invalid = |reason: String| DataError::InvalidAst { reason };
        if n == 0 || kinds.len() != n || children.len() != n || root >= n {
            return Err(invalid("inconsistent node tables".into()));
        }
        let mut parent = vec![None; n];
        for (p, list) in children.iter().enumerate() {
            for &c in list {
                if c >= n || c == root || parent[c].is_some() {
                    return Err(invalid(format!("node {c} has several parents or is out of range")));
                }
                parent[c] = Some(p);
            }
        }
        for (i, k) in kinds.iter().enumerate() {
            match k {
                NodeKind::Structural(kind) if kind.label() != labels[i] => {
                    return Err(invalid(format!("label {:?} does not match kind", labels[i])));
                }
                NodeKind::Token if !children[i].is_empty() => {
                    return Err(invalid(format!("token leaf {:?} has children", labels[i])));
                }
                _ => {}
            }
        }
        // breadth-first renumbering; unreachable nodes mean a cycle or a second root
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        let mut seen = vec![false; n];
        seen[root] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &c in &children[i] {
                if seen[c] {
                    return Err(invalid("cycle".into()));
                }
                seen[c] = true;
                queue.push_back(c);
            }
        }
        if order.len() != n {
            return Err(invalid("not every node is reachable from the root".into()));
        }
        let mut new_id = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        Ok(Self {
            labels: order.iter().map(|&o| labels[o].clone()).collect(),
            kinds: order.iter().map(|&o| kinds[o].clone()).collect(),
            parent: order.iter().map(|&o| parent[o].map(|p| new_id[p])).collect(),
            children: order
                .iter()
                .map(|&o| children[o].iter().map(|&c| new_id[c]).collect())
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self, i: usize) -> &NodeKind {
        &self.kinds[i]
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn child_labels(&self, i: usize) -> Vec<&str> {
        self.children[i].iter().map(|&c| self.label(c)).collect()
    }

    /// Indices of nodes whose label is `label`, in numbering order.
    pub fn find(&self, label: &str) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Label used in the flattened sequence: structural nodes keep their
    /// kind, token leaves become `parentlabel_token`.
    pub fn sbt_label(&self, i: usize) -> String {
        match (&self.kinds[i], self.parent[i]) {
            (NodeKind::Token, Some(p)) => format!("{}_{}", self.labels[p], self.labels[i]),
            _ => self.labels[i].clone(),
        }
    }

    /// S-expression dump, one method per line.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.write_sexpr(self.root(), &mut out);
        out
    }

    fn write_sexpr(&self, i: usize, out: &mut String) {
        if self.kinds[i] == NodeKind::Token {
            out.push_str(&self.labels[i]);
            return;
        }
        let _ = write!(out, "({}", self.labels[i]);
        for &c in &self.children[i] {
            out.push(' ');
            self.write_sexpr(c, out);
        }
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(kind: Kind) -> (String, NodeKind) {
        (kind.label().to_string(), NodeKind::Structural(kind))
    }

    #[test]
    fn renumbers_breadth_first() {
        // 0:block -> [1:expr_stmt -> [3:expr], 2:return]
        let nodes = [s(Kind::Block), s(Kind::ExprStmt), s(Kind::Return), s(Kind::Expr)];
        let (labels, kinds): (Vec<_>, Vec<_>) = nodes.into_iter().unzip();
        let children = vec![vec![1, 2], vec![3], vec![], vec![]];
        let ast = MethodAst::from_children(labels.clone(), kinds.clone(), children, 0).unwrap();
        assert_eq!(ast.labels(), &["block", "expr_stmt", "return", "expr"]);
        assert_eq!(ast.parent(3), Some(1));

        // same tree given with the root last
        let order = [3usize, 2, 1, 0];
        let l2: Vec<_> = order.iter().map(|&o| labels[o].clone()).collect();
        let k2: Vec<_> = order.iter().map(|&o| kinds[o].clone()).collect();
        let c2 = vec![vec![], vec![], vec![0], vec![2, 1]];
        let ast2 = MethodAst::from_children(l2, k2, c2, 3).unwrap();
        assert_eq!(ast, ast2);
        assert_eq!(ast.to_sexpr(), "(block (expr_stmt (expr)) (return))");
    }

    #[test]
    fn rejects_bad_trees() {
        let (labels, kinds): (Vec<_>, Vec<_>) = [s(Kind::Block), s(Kind::Expr)].into_iter().unzip();
        // second node unreachable
        assert!(MethodAst::from_children(labels.clone(), kinds.clone(), vec![vec![], vec![]], 0).is_err());
        // cycle back to the root
        assert!(MethodAst::from_children(labels.clone(), kinds.clone(), vec![vec![1], vec![0]], 0).is_err());
        // label/kind disagreement
        let bad = vec!["block".to_string(), "foo".to_string()];
        assert!(MethodAst::from_children(bad, kinds, vec![vec![1], vec![]], 0).is_err());
    }

    #[test]
    fn kind_labels_round_trip() {
        for &k in Kind::ALL {
            assert_eq!(Kind::from_label(k.label()), Some(k));
        }
    }
}
