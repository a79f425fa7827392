//! Arithmetic expressions over named variables.
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := ("-" | "+") unary | power
//! power := atom ("^" unary)?
//! atom  := number | name | func "(" expr ")" | "(" expr ")"
//! func  := sin | cos | exp | abs
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^-1` is `0.5`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
}

/// Error at a 0-based character offset within the expression text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", match kind {
    ExprErrorKind::Syntax(m) => format!("column {}: {m}", offset + 1),
    ExprErrorKind::UnknownIdentifier(n) => format!("column {}: unknown identifier {n:?}", offset + 1),
})]
pub struct ExprError {
    pub offset: usize,
    pub kind: ExprErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Call(f, a) => f.apply(a.eval(vars)),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(vars), b.eval(vars));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
        }
    }

    fn uses_vars(&self) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(_) => true,
            Node::Neg(a) | Node::Call(_, a) => a.uses_vars(),
            Node::Bin(_, a, b) => a.uses_vars() || b.uses_vars(),
        }
    }
}

/// Integer exponents use repeated multiplication so that `x^3` matches
/// `x * x * x` exactly.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// A parsed expression bound to an ordered variable list.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
    arity: usize,
}

impl Expr {
    pub fn parse(text: &str, vars: &[&str]) -> Result<Self, ExprError> {
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            vars,
            end: text.chars().count(),
        };
        let root = p.expr()?;
        if let Some(tok) = p.peek() {
            return Err(p.syntax(tok.offset, format!("unexpected {}", tok.kind)));
        }
        Ok(Expr {
            root,
            source: text.to_string(),
            arity: vars.len(),
        })
    }

    pub fn constant(value: f64) -> Self {
        Expr {
            root: Node::Num(value),
            source: format!("{value}"),
            arity: 0,
        }
    }

    /// `vars.len()` must be at least the arity the expression was parsed with.
    pub fn eval(&self, vars: &[f64]) -> f64 {
        debug_assert!(vars.len() >= self.arity);
        self.root.eval(vars)
    }

    /// Value when no variable occurs.
    pub fn as_constant(&self) -> Option<f64> {
        (!self.root.uses_vars()).then(|| self.root.eval(&[]))
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "number {v}"),
            TokKind::Ident(s) => write!(f, "identifier {s:?}"),
            TokKind::Op(c) => write!(f, "operator '{c}'"),
            TokKind::LParen => f.write_str("'('"),
            TokKind::RParen => f.write_str("')'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let kind = if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            let value = lexeme.parse::<f64>().map_err(|_| ExprError {
                offset: start,
                kind: ExprErrorKind::Syntax(format!("malformed number {lexeme:?}")),
            })?;
            TokKind::Num(value)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            TokKind::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
                '(' => TokKind::LParen,
                ')' => TokKind::RParen,
                _ => {
                    return Err(ExprError {
                        offset: start,
                        kind: ExprErrorKind::Syntax(format!("unexpected character {c:?}")),
                    })
                }
            }
        };
        out.push(Token { kind, offset: start });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn syntax(&self, offset: usize, msg: String) -> ExprError {
        ExprError {
            offset,
            kind: ExprErrorKind::Syntax(msg),
        }
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token { kind: TokKind::Op(c), .. }) if ops.contains(c) => {
                self.pos += 1;
                Some(*c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Node::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self, open: usize) -> Result<(), ExprError> {
        match self.next() {
            Some(Token { kind: TokKind::RParen, .. }) => Ok(()),
            Some(t) => Err(self.syntax(t.offset, format!("expected ')' to close column {}, found {}", open + 1, t.kind))),
            None => Err(self.syntax(self.end, format!("unclosed '(' at column {}", open + 1))),
        }
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some(tok) = self.next() else {
            return Err(self.syntax(self.end, "unexpected end of expression".into()));
        };
        match &tok.kind {
            TokKind::Num(v) => Ok(Node::Num(*v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen(tok.offset)?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                if let Some(func) = Func::from_name(name) {
                    match self.next() {
                        Some(Token { kind: TokKind::LParen, offset }) => {
                            let arg = self.expr()?;
                            self.expect_rparen(*offset)?;
                            Ok(Node::Call(func, Box::new(arg)))
                        }
                        _ => Err(self.syntax(tok.offset, format!("function {name} needs a parenthesised argument"))),
                    }
                } else if let Some(i) = self.vars.iter().position(|v| v == name) {
                    Ok(Node::Var(i))
                } else {
                    Err(ExprError {
                        offset: tok.offset,
                        kind: ExprErrorKind::UnknownIdentifier(name.clone()),
                    })
                }
            }
            other => Err(self.syntax(tok.offset, format!("unexpected {other}"))),
        }
    }
}

/// `x1, ..., xn`.
pub fn state_vars(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(text: &str, vars: &[&str], values: &[f64]) -> f64 {
        Expr::parse(text, vars).unwrap().eval(values)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &[], &[]), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[], &[]), 512.0);
        assert_eq!(eval("-2 ^ 2", &[], &[]), -4.0);
        assert_eq!(eval("2 ^ -1", &[], &[]), 0.5);
        assert_eq!(eval("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(eval("1 - 2 - 3", &[], &[]), -4.0);
        assert_eq!(eval("--3", &[], &[]), 3.0);
        assert_eq!(eval("1.5e2 + .5 + 2E-1", &[], &[]), 150.7);
    }

    #[test]
    fn variables_and_functions() {
        let v = ["x1", "x2"];
        assert_eq!(eval("x1 - x2*(x2^2 - 9) + 2", &v, &[1.0, -1.0]), -5.0);
        assert_eq!(eval("abs(x1) + exp(0) + cos(0) + sin(0)", &v, &[-3.0, 0.0]), 5.0);
        assert_eq!(eval("4 + sin(t)", &["t"], &[0.0]), 4.0);
    }

    #[test]
    fn integer_powers_are_exact() {
        let x = 1.1_f64;
        assert_eq!(eval("x1^3", &["x1"], &[x]), x * x * x);
        assert_eq!(eval("x1^4", &["x1"], &[-x]), x.powi(4));
        assert_eq!(eval("4^0.5", &[], &[]), 2.0);
    }

    #[test]
    fn unknown_identifier_is_reported_with_column() {
        let e = Expr::parse("x1 + x3", &["x1", "x2"]).unwrap_err();
        assert_eq!(e.kind, ExprErrorKind::UnknownIdentifier("x3".into()));
        assert_eq!(e.offset, 5);
        assert_eq!(e.to_string(), "column 6: unknown identifier \"x3\"");
        let e = Expr::parse("tan(t)", &["t"]).unwrap_err();
        assert_eq!(e.kind, ExprErrorKind::UnknownIdentifier("tan".into()));
    }

    #[test]
    fn syntax_errors() {
        for (text, offset) in [("1 +", 3), ("(1 + 2", 6), ("1 2", 2), ("sin 1", 0), ("1 # 2", 2), ("", 0), (")", 0)] {
            let e = Expr::parse(text, &[]).unwrap_err();
            assert!(matches!(e.kind, ExprErrorKind::Syntax(_)), "{text}: {e:?}");
            assert_eq!(e.offset, offset, "{text}: {e}");
        }
    }

    #[test]
    fn constant_detection() {
        assert_eq!(Expr::parse("2 * 3", &["t"]).unwrap().as_constant(), Some(6.0));
        assert_eq!(Expr::parse("2 * t", &["t"]).unwrap().as_constant(), None);
    }

    fn arb_node(depth: u32) -> BoxedStrategy<String> {
        let leaf = prop_oneof![
            (0u32..100).prop_map(|v| v.to_string()),
            Just("x1".to_string()),
            Just("x2".to_string()),
        ];
        leaf.prop_recursive(depth, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), prop::sample::select(vec!["+", "-", "*"]), inner.clone())
                    .prop_map(|(a, op, b)| format!("({a}) {op} ({b})")),
                inner.clone().prop_map(|a| format!("-({a})")),
                inner.prop_map(|a| format!("sin({a})")),
            ]
        })
        .boxed()
    }

    /// Reference evaluator over the fully parenthesised strings generated
    /// above, sharing nothing with the parser.
    fn reference(s: &str, x: &[f64; 2]) -> f64 {
        let s = s.trim();
        let strip = |s: &str| -> Option<String> {
            if !(s.starts_with('(') && s.ends_with(')')) {
                return None;
            }
            let mut depth = 0;
            for (i, c) in s.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 && i != s.len() - 1 {
                            return None;
                        }
                    }
                    _ => {}
                }
            }
            Some(s[1..s.len() - 1].to_string())
        };
        if let Some(inner) = strip(s) {
            return reference(&inner, x);
        }
        let mut depth = 0;
        for (i, c) in s.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                '+' | '-' | '*' if depth == 0 && i > 0 => {
                    let (a, b) = (reference(&s[..i], x), reference(&s[i + 1..], x));
                    return match c {
                        '+' => a + b,
                        '-' => a - b,
                        _ => a * b,
                    };
                }
                _ => {}
            }
        }
        if let Some(rest) = s.strip_prefix('-') {
            return -reference(rest, x);
        }
        if let Some(rest) = s.strip_prefix("sin") {
            return reference(rest, x).sin();
        }
        match s {
            "x1" => x[0],
            "x2" => x[1],
            n => n.parse().unwrap(),
        }
    }

    proptest! {
        #[test]
        fn agrees_with_reference(text in arb_node(4), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let got = eval(&text, &["x1", "x2"], &[a, b]);
            let want = reference(&text, &[a, b]);
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{text}: {got} vs {want}");
        }
    }
}
