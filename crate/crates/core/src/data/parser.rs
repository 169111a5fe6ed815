//! Recursive-descent parser for a single Java method.
//!
//! Supported subset: modifiers, return type (including qualified and
//! generic types, arrays), parameters, `throws`, blocks, local variable
//! declarations, `if`/`else`, `for` (classic and for-each), `while`,
//! `return`, `break`, `continue`, `throw`, expression statements, calls,
//! field access, indexing, `new`, literals, unary/binary/ternary operators.
//! Everything else is reported as a [`DataError::Parse`].
//!
//! Expressions are kept flat the way srcML writes them: an `expr` node holds
//! its operands and `operator` nodes in source order.

use super::ast::{Kind, MethodAst, NodeKind};
use super::tokenize::{tokenize, TokenizeMode};
use super::DataError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Char(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "<<=", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", "(",
    ")", "{", "}", "[", "]", ";", ",", ".", "=", "<", ">", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
    "@",
];

const MODIFIERS: &[&str] = &[
    "public",
    "private",
    "protected",
    "static",
    "final",
    "abstract",
    "synchronized",
    "native",
    "strictfp",
];

const PRIMITIVES: &[&str] = &["void", "boolean", "int", "long", "short", "byte", "char", "float", "double"];

const KEYWORDS: &[&str] = &[
    "public", "private", "protected", "static", "final", "abstract", "synchronized", "native", "transient",
    "volatile", "strictfp", "void", "boolean", "int", "long", "short", "byte", "char", "float", "double", "if",
    "else", "for", "while", "do", "return", "break", "continue", "throw", "throws", "new", "this", "null", "true",
    "false", "class", "interface", "try", "catch", "finally", "switch", "case", "default", "instanceof", "super",
    "import", "package", "extends", "implements", "enum", "assert", "goto", "const",
];

const BINARY_OPS: &[&str] = &[
    "+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==", "!=", "&&", "||", "&", "|", "^", "<<", "=", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "<<=",
];

const PREFIX_OPS: &[&str] = &["!", "-", "+", "++", "--", "~"];

fn lex(src: &str) -> Result<(Vec<Token>, (usize, usize)), DataError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, message: String| DataError::Parse { line, col, message };

    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let advance = |n: usize, i: &mut usize, line: &mut usize, col: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(2, &mut i, &mut line, &mut col);
            loop {
                if i + 1 >= chars.len() {
                    return Err(err(tline, tcol, "unterminated block comment".into()));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    advance(2, &mut i, &mut line, &mut col);
                    break;
                }
                advance(1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                advance(1, &mut i, &mut line, &mut col);
            }
            let word: String = chars[start..i].iter().collect();
            toks.push(Token {
                tok: Tok::Ident(word),
                line: tline,
                col: tcol,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let hex = c == '0' && matches!(chars.get(i + 1), Some('x' | 'X'));
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '+' || d == '-') && !hex && matches!(chars[i - 1], 'e' | 'E');
                let dot = d == '.' && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
                if d.is_ascii_alphanumeric() || d == '_' || exp_sign || dot {
                    advance(1, &mut i, &mut line, &mut col);
                } else {
                    break;
                }
            }
            toks.push(Token {
                tok: Tok::Number(chars[start..i].iter().collect::<String>().to_lowercase()),
                line: tline,
                col: tcol,
            });
            continue;
        }
        if c == '"' || c == '\'' {
            advance(1, &mut i, &mut line, &mut col);
            let start = i;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tline, tcol, "unterminated literal".into())),
                    Some('\\') => {
                        if i + 1 >= chars.len() {
                            return Err(err(tline, tcol, "unterminated literal".into()));
                        }
                        advance(2, &mut i, &mut line, &mut col);
                    }
                    Some(&q) if q == c => break,
                    Some(_) => advance(1, &mut i, &mut line, &mut col),
                }
            }
            let body: String = chars[start..i].iter().collect();
            advance(1, &mut i, &mut line, &mut col);
            toks.push(Token {
                tok: if c == '"' { Tok::Str(body) } else { Tok::Char(body) },
                line: tline,
                col: tcol,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                advance(sym.len(), &mut i, &mut line, &mut col);
                toks.push(Token {
                    tok: Tok::Sym(sym),
                    line: tline,
                    col: tcol,
                });
            }
            None => return Err(err(tline, tcol, format!("unexpected character {c:?}"))),
        }
    }
    Ok((toks, (line, col)))
}

#[derive(Default)]
struct Builder {
    labels: Vec<String>,
    kinds: Vec<NodeKind>,
    children: Vec<Vec<usize>>,
}

impl Builder {
    fn node(&mut self, kind: Kind) -> usize {
        self.labels.push(kind.label().to_string());
        self.kinds.push(NodeKind::Structural(kind));
        self.children.push(Vec::new());
        self.labels.len() - 1
    }

    fn child(&mut self, parent: usize, kind: Kind) -> usize {
        let c = self.node(kind);
        self.children[parent].push(c);
        c
    }

    fn attach(&mut self, parent: usize, child: usize) {
        self.children[parent].push(child);
    }

    fn leaf(&mut self, parent: usize, text: &str) {
        self.labels.push(text.to_string());
        self.kinds.push(NodeKind::Token);
        self.children.push(Vec::new());
        let id = self.labels.len() - 1;
        self.children[parent].push(id);
    }

    /// `kind` node holding the sub-tokens of `text` as leaves.
    fn tokens(&mut self, parent: usize, kind: Kind, text: &str) -> usize {
        let n = self.child(parent, kind);
        self.fill(n, text);
        n
    }

    fn fill(&mut self, n: usize, text: &str) {
        let toks = tokenize(text, TokenizeMode::Code);
        if toks.is_empty() {
            let raw = text.to_lowercase();
            if !raw.is_empty() {
                self.leaf(n, &raw);
            }
        }
        for t in toks {
            self.leaf(n, &t);
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
    b: Builder,
    ternary_depth: usize,
}

type PResult<T> = Result<T, DataError>;

/// Parses one Java method into a breadth-first numbered [`MethodAst`].
pub fn parse_method(code: &str) -> Result<MethodAst, DataError> {
    let (toks, eof) = lex(code)?;
    let mut p = Parser {
        toks,
        pos: 0,
        eof,
        b: Builder::default(),
        ternary_depth: 0,
    };
    let root = p.method()?;
    if let Some(t) = p.toks.get(p.pos) {
        return Err(DataError::Parse {
            line: t.line,
            col: t.col,
            message: "unexpected input after the method body".into(),
        });
    }
    let Builder {
        labels,
        kinds,
        children,
    } = p.b;
    MethodAst::from_children(labels, kinds, children, root)
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, col) = self.toks.get(self.pos).map_or(self.eof, |t| (t.line, t.col));
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Ident(s) | Tok::Number(s)) => format!("`{s}`"),
            Some(Tok::Str(_)) => "string literal".into(),
            Some(Tok::Char(_)) => "char literal".into(),
            Some(Tok::Sym(s)) => format!("`{s}`"),
        };
        Err(DataError::Parse {
            line,
            col,
            message: format!("{}, found {found}", message.into()),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_sym_at(&self, k: usize, s: &str) -> bool {
        matches!(self.peek_at(k), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`"))
        }
    }

    fn take_ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn take_type_ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if PRIMITIVES.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.take_ident().or_else(|_| self.error("expected type")),
        }
    }

    fn method(&mut self) -> PResult<usize> {
        let f = self.b.node(Kind::Function);
        while let Some(Tok::Ident(m)) = self.peek() {
            if !MODIFIERS.contains(&m.as_str()) {
                break;
            }
            let m = m.clone();
            self.pos += 1;
            let s = self.b.child(f, Kind::Specifier);
            self.b.leaf(s, &m);
        }
        if self.is_sym("@") {
            return self.error("annotations are not supported");
        }
        if self.is_sym("<") {
            return self.error("generic methods are not supported");
        }
        let ty = self.type_node()?;
        self.b.attach(f, ty);
        let name = self.take_ident()?;
        self.b.tokens(f, Kind::Name, &name);

        let params = self.b.child(f, Kind::ParameterList);
        self.expect_sym("(")?;
        if !self.is_sym(")") {
            loop {
                let param = self.b.child(params, Kind::Parameter);
                let decl = self.b.child(param, Kind::Decl);
                if self.is_kw("final") {
                    self.pos += 1;
                    let s = self.b.child(decl, Kind::Specifier);
                    self.b.leaf(s, "final");
                }
                let ty = self.type_node()?;
                self.b.attach(decl, ty);
                let name = self.take_ident()?;
                self.b.tokens(decl, Kind::Name, &name);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;

        if self.is_kw("throws") {
            self.pos += 1;
            let throws = self.b.child(f, Kind::Throws);
            loop {
                let arg = self.b.child(throws, Kind::Argument);
                let expr = self.b.child(arg, Kind::Expr);
                let n = self.type_name()?;
                self.b.attach(expr, n);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        if !self.is_sym("{") {
            return self.error("expected method body `{`");
        }
        let body = self.block()?;
        self.b.attach(f, body);
        Ok(f)
    }

    /// `type` node: a (possibly qualified or generic) name plus `[]` pairs.
    fn type_node(&mut self) -> PResult<usize> {
        let t = self.b.node(Kind::Type);
        let n = self.type_name()?;
        self.b.attach(t, n);
        while self.is_sym("[") && self.is_sym_at(1, "]") {
            self.pos += 2;
            self.b.child(t, Kind::Index);
        }
        Ok(t)
    }

    fn type_name(&mut self) -> PResult<usize> {
        let first = self.take_type_ident()?;
        let mut parts = vec![self.simple_name(&first)];
        while self.is_sym(".") && matches!(self.peek_at(1), Some(Tok::Ident(_))) {
            self.pos += 1;
            let op = self.b.node(Kind::Operator);
            self.b.leaf(op, ".");
            parts.push(op);
            let next = self.take_ident()?;
            parts.push(self.simple_name(&next));
        }
        if self.eat_sym("<") {
            let args = self.b.node(Kind::ArgumentList);
            if !self.is_sym(">") {
                loop {
                    if self.is_sym("?") {
                        return self.error("wildcard type arguments are not supported");
                    }
                    let arg = self.b.child(args, Kind::Argument);
                    let inner = self.type_name()?;
                    self.b.attach(arg, inner);
                    while self.is_sym("[") && self.is_sym_at(1, "]") {
                        self.pos += 2;
                        self.b.child(arg, Kind::Index);
                    }
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(">")?;
            parts.push(args);
        }
        Ok(self.wrap_name(parts))
    }

    fn simple_name(&mut self, ident: &str) -> usize {
        let n = self.b.node(Kind::Name);
        self.b.fill(n, ident);
        n
    }

    fn wrap_name(&mut self, parts: Vec<usize>) -> usize {
        if parts.len() == 1 {
            return parts[0];
        }
        let n = self.b.node(Kind::Name);
        for p in parts {
            self.b.attach(n, p);
        }
        n
    }

    /// Token-level scan for `final? Type ident (= | ; | , | :)` starting at
    /// the cursor, without building nodes.
    fn looks_like_decl(&self) -> bool {
        let mut k = 0;
        let ident_at = |k: usize| match self.peek_at(k) {
            Some(Tok::Ident(s)) => !KEYWORDS.contains(&s.as_str()) || PRIMITIVES.contains(&s.as_str()),
            _ => false,
        };
        if matches!(self.peek_at(0), Some(Tok::Ident(s)) if s == "final") {
            k += 1;
        }
        if !ident_at(k) {
            return false;
        }
        k += 1;
        while self.is_sym_at(k, ".") && ident_at(k + 1) {
            k += 2;
        }
        if self.is_sym_at(k, "<") {
            let mut depth = 0usize;
            loop {
                match self.peek_at(k) {
                    Some(Tok::Sym("<")) => depth += 1,
                    Some(Tok::Sym(">")) => {
                        depth -= 1;
                        if depth == 0 {
                            k += 1;
                            break;
                        }
                    }
                    Some(Tok::Ident(_)) | Some(Tok::Sym(",")) | Some(Tok::Sym(".")) | Some(Tok::Sym("?")) => {}
                    Some(Tok::Sym("[")) | Some(Tok::Sym("]")) => {}
                    _ => return false,
                }
                k += 1;
            }
        }
        while self.is_sym_at(k, "[") && self.is_sym_at(k + 1, "]") {
            k += 2;
        }
        let name_ok = matches!(self.peek_at(k), Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()));
        name_ok && ["=", ";", ",", ":"].iter().any(|s| self.is_sym_at(k + 1, s))
    }

    fn block(&mut self) -> PResult<usize> {
        let b = self.b.node(Kind::Block);
        self.expect_sym("{")?;
        while !self.is_sym("}") {
            if self.peek().is_none() {
                return self.error("expected `}`");
            }
            let s = self.statement()?;
            self.b.attach(b, s);
        }
        self.pos += 1;
        Ok(b)
    }

    fn statement(&mut self) -> PResult<usize> {
        if self.is_sym("{") {
            return self.block();
        }
        if self.eat_sym(";") {
            return Ok(self.b.node(Kind::EmptyStmt));
        }
        if let Some(Tok::Ident(w)) = self.peek() {
            match w.as_str() {
                "if" => return self.if_stmt(),
                "while" => return self.while_stmt(),
                "for" => return self.for_stmt(),
                "return" => {
                    self.pos += 1;
                    let r = self.b.node(Kind::Return);
                    if !self.is_sym(";") {
                        let e = self.expr()?;
                        self.b.attach(r, e);
                    }
                    self.expect_sym(";")?;
                    return Ok(r);
                }
                "break" | "continue" => {
                    let kind = if w == "break" { Kind::Break } else { Kind::Continue };
                    self.pos += 1;
                    self.expect_sym(";")?;
                    return Ok(self.b.node(kind));
                }
                "throw" => {
                    self.pos += 1;
                    let t = self.b.node(Kind::Throw);
                    let e = self.expr()?;
                    self.b.attach(t, e);
                    self.expect_sym(";")?;
                    return Ok(t);
                }
                "do" | "try" | "switch" | "class" | "interface" | "enum" | "assert" | "synchronized" | "else"
                | "catch" | "finally" | "case" | "default" => {
                    return self.error("unsupported statement");
                }
                _ => {}
            }
        }
        if self.looks_like_decl() {
            let s = self.b.node(Kind::DeclStmt);
            self.decls(s)?;
            self.expect_sym(";")?;
            return Ok(s);
        }
        let s = self.b.node(Kind::ExprStmt);
        let e = self.expr()?;
        self.b.attach(s, e);
        self.expect_sym(";")?;
        Ok(s)
    }

    /// `final? Type a (= e)? (, b (= e)?)*` as `decl` children of `parent`.
    fn decls(&mut self, parent: usize) -> PResult<()> {
        let mut spec = None;
        if self.is_kw("final") {
            self.pos += 1;
            spec = Some(());
        }
        let ty = self.type_node()?;
        let mut first = true;
        loop {
            let d = self.b.child(parent, Kind::Decl);
            if first {
                if spec.is_some() {
                    let s = self.b.child(d, Kind::Specifier);
                    self.b.leaf(s, "final");
                }
                self.b.attach(d, ty);
                first = false;
            }
            let name = self.take_ident()?;
            self.b.tokens(d, Kind::Name, &name);
            if self.eat_sym("=") {
                if self.is_sym("{") {
                    return self.error("array initializers are not supported");
                }
                let init = self.b.child(d, Kind::Init);
                let e = self.expr()?;
                self.b.attach(init, e);
            }
            if !self.eat_sym(",") {
                return Ok(());
            }
        }
    }

    fn condition(&mut self, parent: usize) -> PResult<()> {
        let c = self.b.child(parent, Kind::Condition);
        self.expect_sym("(")?;
        let e = self.expr()?;
        self.b.attach(c, e);
        self.expect_sym(")")
    }

    fn if_stmt(&mut self) -> PResult<usize> {
        self.pos += 1;
        let n = self.b.node(Kind::If);
        self.condition(n)?;
        let then = self.b.child(n, Kind::Then);
        let body = self.statement()?;
        self.b.attach(then, body);
        if self.is_kw("else") {
            self.pos += 1;
            let e = self.b.child(n, Kind::Else);
            let body = self.statement()?;
            self.b.attach(e, body);
        }
        Ok(n)
    }

    fn while_stmt(&mut self) -> PResult<usize> {
        self.pos += 1;
        let n = self.b.node(Kind::While);
        self.condition(n)?;
        let body = self.statement()?;
        self.b.attach(n, body);
        Ok(n)
    }

    fn for_stmt(&mut self) -> PResult<usize> {
        self.pos += 1;
        let n = self.b.node(Kind::For);
        let control = self.b.child(n, Kind::Control);
        self.expect_sym("(")?;
        let init = self.b.child(control, Kind::Init);
        if self.looks_like_decl() && self.is_foreach() {
            let d = self.b.child(init, Kind::Decl);
            if self.is_kw("final") {
                self.pos += 1;
                let s = self.b.child(d, Kind::Specifier);
                self.b.leaf(s, "final");
            }
            let ty = self.type_node()?;
            self.b.attach(d, ty);
            let name = self.take_ident()?;
            self.b.tokens(d, Kind::Name, &name);
            self.expect_sym(":")?;
            let range = self.b.child(d, Kind::Range);
            let e = self.expr()?;
            self.b.attach(range, e);
        } else {
            if !self.is_sym(";") {
                if self.looks_like_decl() {
                    self.decls(init)?;
                } else {
                    self.expr_list(init)?;
                }
            }
            self.expect_sym(";")?;
            let cond = self.b.child(control, Kind::Condition);
            if !self.is_sym(";") {
                let e = self.expr()?;
                self.b.attach(cond, e);
            }
            self.expect_sym(";")?;
            let incr = self.b.child(control, Kind::Incr);
            if !self.is_sym(")") {
                self.expr_list(incr)?;
            }
        }
        self.expect_sym(")")?;
        let body = self.statement()?;
        self.b.attach(n, body);
        Ok(n)
    }

    fn is_foreach(&self) -> bool {
        let mut k = 0;
        while let Some(t) = self.peek_at(k) {
            match t {
                Tok::Sym(":") => return true,
                Tok::Sym("=") | Tok::Sym(";") | Tok::Sym(")") => return false,
                _ => k += 1,
            }
        }
        false
    }

    fn expr_list(&mut self, parent: usize) -> PResult<()> {
        loop {
            let e = self.expr()?;
            self.b.attach(parent, e);
            if !self.eat_sym(",") {
                return Ok(());
            }
        }
    }

    fn expr(&mut self) -> PResult<usize> {
        let e = self.b.node(Kind::Expr);
        let outer = std::mem::take(&mut self.ternary_depth);
        let r = self.expr_into(e);
        self.ternary_depth = outer;
        r.map(|_| e)
    }

    fn op(&mut self, parent: usize, text: &str) {
        let o = self.b.child(parent, Kind::Operator);
        self.b.leaf(o, text);
    }

    fn expr_into(&mut self, e: usize) -> PResult<()> {
        loop {
            while let Some(Tok::Sym(s)) = self.peek() {
                if !PREFIX_OPS.contains(s) {
                    break;
                }
                let s = *s;
                self.pos += 1;
                self.op(e, s);
            }
            self.operand(e)?;
            while let Some(Tok::Sym(s @ ("++" | "--"))) = self.peek() {
                let s = *s;
                self.pos += 1;
                self.op(e, s);
            }
            match self.peek() {
                Some(Tok::Sym(s)) if BINARY_OPS.contains(s) => {
                    let s = *s;
                    self.pos += 1;
                    self.op(e, s);
                }
                Some(Tok::Sym("?")) => {
                    self.pos += 1;
                    self.ternary_depth += 1;
                    self.op(e, "?");
                }
                Some(Tok::Sym(":")) if self.ternary_depth > 0 => {
                    self.pos += 1;
                    self.ternary_depth -= 1;
                    self.op(e, ":");
                }
                _ => {
                    if self.ternary_depth > 0 {
                        return self.error("expected `:`");
                    }
                    return Ok(());
                }
            }
        }
    }

    fn operand(&mut self, e: usize) -> PResult<()> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("expected expression");
        };
        match tok {
            Tok::Number(n) => {
                self.pos += 1;
                let l = self.b.child(e, Kind::Literal);
                self.b.leaf(l, &n);
            }
            Tok::Str(s) | Tok::Char(s) => {
                self.pos += 1;
                let l = self.b.child(e, Kind::Literal);
                for t in tokenize(&s, TokenizeMode::Code) {
                    self.b.leaf(l, &t);
                }
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let outer = std::mem::take(&mut self.ternary_depth);
                self.expr_into(e)?;
                self.ternary_depth = outer;
                self.expect_sym(")")?;
                if self.is_sym(".") || self.is_sym("[") {
                    self.chain(e, None)?;
                }
            }
            Tok::Ident(w) => match w.as_str() {
                "true" | "false" | "null" => {
                    self.pos += 1;
                    let l = self.b.child(e, Kind::Literal);
                    self.b.leaf(l, &w);
                }
                "this" => {
                    self.pos += 1;
                    let n = self.simple_name("this");
                    self.chain(e, Some(n))?;
                }
                "new" => {
                    self.pos += 1;
                    self.op(e, "new");
                    let ty = self.type_name()?;
                    if self.is_sym("(") {
                        let call = self.b.child(e, Kind::Call);
                        self.b.attach(call, ty);
                        self.arguments(call)?;
                        if self.is_sym(".") {
                            self.pos += 1;
                            self.op(e, ".");
                            let id = self.take_ident()?;
                            let n = self.simple_name(&id);
                            self.chain(e, Some(n))?;
                        }
                    } else if self.is_sym("[") {
                        let n = self.b.child(e, Kind::Name);
                        self.b.attach(n, ty);
                        while self.eat_sym("[") {
                            let idx = self.b.child(n, Kind::Index);
                            let inner = self.expr()?;
                            self.b.attach(idx, inner);
                            self.expect_sym("]")?;
                        }
                    } else {
                        return self.error("expected `(` or `[` after `new` type");
                    }
                }
                _ if KEYWORDS.contains(&w.as_str()) => return self.error("unsupported expression"),
                _ => {
                    self.pos += 1;
                    let n = self.simple_name(&w);
                    self.chain(e, Some(n))?;
                }
            },
            _ => return self.error("expected expression"),
        }
        Ok(())
    }

    /// Member access, calls and indexing after a leading name, or after a
    /// parenthesized operand when `first` is `None`.
    fn chain(&mut self, e: usize, first: Option<usize>) -> PResult<()> {
        let mut parts: Vec<usize> = first.into_iter().collect();
        loop {
            if self.is_sym(".") {
                self.pos += 1;
                let id = self.take_ident()?;
                if parts.is_empty() {
                    self.op(e, ".");
                } else {
                    let op = self.b.node(Kind::Operator);
                    self.b.leaf(op, ".");
                    parts.push(op);
                }
                parts.push(self.simple_name(&id));
            } else if self.is_sym("(") {
                if parts.is_empty() {
                    return self.error("unexpected `(`");
                }
                let call = self.b.child(e, Kind::Call);
                let name = self.wrap_name(std::mem::take(&mut parts));
                self.b.attach(call, name);
                self.arguments(call)?;
            } else if self.is_sym("[") {
                self.pos += 1;
                let idx = self.b.node(Kind::Index);
                let inner = self.expr()?;
                self.b.attach(idx, inner);
                self.expect_sym("]")?;
                if parts.is_empty() {
                    self.b.attach(e, idx);
                } else {
                    parts.push(idx);
                }
            } else {
                break;
            }
        }
        if !parts.is_empty() {
            let n = self.wrap_name(parts);
            self.b.attach(e, n);
        }
        Ok(())
    }

    fn arguments(&mut self, call: usize) -> PResult<()> {
        let list = self.b.child(call, Kind::ArgumentList);
        self.expect_sym("(")?;
        if !self.is_sym(")") {
            loop {
                let arg = self.b.child(list, Kind::Argument);
                let e = self.expr()?;
                self.b.attach(arg, e);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")
    }
}
