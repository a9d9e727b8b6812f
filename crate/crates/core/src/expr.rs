//! Expression language for flow right-hand sides and guards.
//!
//! Expressions are small trees over real constants, state variables, the
//! time symbol `t`, and a fixed set of unary and binary operators. Guards
//! are boolean combinations of strict or non-strict comparisons. Equality
//! atoms are rejected at parse time: an equality holds on a measure-zero
//! time set and can never be fired under window-measure semantics.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

/// Unary operators and functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl UnaryOp {
    fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Sqrt => Some("sqrt"),
            UnaryOp::Abs => Some("abs"),
        }
    }

    fn from_function_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

/// A reference to a declared state variable, by position.
#[derive(Debug, Clone)]
pub struct VarRef {
    pub index: usize,
    pub name: Arc<str>,
}

impl PartialEq for VarRef {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index && self.name == other.name
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(VarRef),
    Time,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn is_strict(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Gt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Guard {
    Bool(bool),
    Cmp(CmpOp, Expr, Expr),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

/// Node count of an expression or guard tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExprLength(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainErrorKind {
    DivisionByZero,
    SqrtOfNegative,
    NonFinite,
}

impl fmt::Display for DomainErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainErrorKind::DivisionByZero => f.write_str("division by zero"),
            DomainErrorKind::SqrtOfNegative => f.write_str("square root of a negative number"),
            DomainErrorKind::NonFinite => f.write_str("non-finite result"),
        }
    }
}

/// Evaluation failure, naming the offending sub-expression.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} in `{node}`")]
pub struct EvalError {
    pub kind: DomainErrorKind,
    pub node: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown identifier `{name}` at column {column}")]
    UnknownIdentifier { name: String, column: usize },
    #[error("equality comparison at column {column} is not supported; use a strict or non-strict inequality")]
    Equality { column: usize },
}

impl Expr {
    pub fn var(index: usize, name: &str) -> Expr {
        Expr::Var(VarRef { index, name: Arc::from(name) })
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn length(&self) -> ExprLength {
        ExprLength(self.node_count())
    }

    fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Time => 1,
            Expr::Unary(_, e) => 1 + e.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Expr::Var(v) => Some(v.index),
            Expr::Const(_) | Expr::Time => None,
            Expr::Unary(_, e) => e.max_var_index(),
            Expr::Binary(_, l, r) => l.max_var_index().max(r.max_var_index()),
        }
    }

    pub fn eval(&self, vals: &[f64], t: f64) -> Result<f64, EvalError> {
        let out = match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => vals[v.index],
            Expr::Time => t,
            Expr::Unary(op, e) => {
                let x = e.eval(vals, t)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Sqrt => {
                        if x < 0.0 {
                            return Err(self.domain_error(DomainErrorKind::SqrtOfNegative));
                        }
                        x.sqrt()
                    }
                    UnaryOp::Abs => x.abs(),
                }
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval(vals, t)?;
                let b = r.eval(vals, t)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain_error(DomainErrorKind::DivisionByZero));
                        }
                        a / b
                    }
                    BinaryOp::Pow => pow(a, b),
                }
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(self.domain_error(DomainErrorKind::NonFinite))
        }
    }

    fn domain_error(&self, kind: DomainErrorKind) -> EvalError {
        EvalError { kind, node: self.to_string() }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{})", -c)
            }
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => f.write_str(&v.name),
            Expr::Time => f.write_str("t"),
            // `-2` would reparse as a negative literal.
            Expr::Unary(UnaryOp::Neg, e) if matches!(**e, Expr::Const(_)) => write!(f, "(-({e}))"),
            Expr::Unary(UnaryOp::Neg, e) => write!(f, "(-{e})"),
            Expr::Unary(op, e) => write!(f, "{}({e})", op.function_name().unwrap_or("?")),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

impl Guard {
    pub fn cmp(op: CmpOp, l: Expr, r: Expr) -> Guard {
        Guard::Cmp(op, l, r)
    }

    pub fn and(a: Guard, b: Guard) -> Guard {
        Guard::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Guard, b: Guard) -> Guard {
        Guard::Or(Box::new(a), Box::new(b))
    }

    pub fn length(&self) -> ExprLength {
        ExprLength(self.node_count())
    }

    fn node_count(&self) -> usize {
        match self {
            Guard::Bool(_) => 1,
            Guard::Cmp(_, l, r) => 1 + l.node_count() + r.node_count(),
            Guard::And(a, b) | Guard::Or(a, b) => 1 + a.node_count() + b.node_count(),
            Guard::Not(g) => 1 + g.node_count(),
        }
    }

    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Guard::Bool(_) => None,
            Guard::Cmp(_, l, r) => l.max_var_index().max(r.max_var_index()),
            Guard::And(a, b) | Guard::Or(a, b) => a.max_var_index().max(b.max_var_index()),
            Guard::Not(g) => g.max_var_index(),
        }
    }

    /// Exact satisfaction.
    pub fn holds(&self, vals: &[f64], t: f64) -> Result<bool, EvalError> {
        self.holds_weakened(vals, t, 0.0)
    }

    /// Satisfaction of the guard with every atom relaxed by `delta`.
    ///
    /// `l < r` becomes `l < r + delta`, `l > r` becomes `l > r - delta`, and
    /// so on. Negations are pushed to the atoms first, so the relaxation is
    /// monotone in `delta` for any guard shape.
    pub fn holds_weakened(&self, vals: &[f64], t: f64, delta: f64) -> Result<bool, EvalError> {
        self.holds_polar(vals, t, delta, true)
    }

    fn holds_polar(&self, vals: &[f64], t: f64, delta: f64, positive: bool) -> Result<bool, EvalError> {
        Ok(match self {
            Guard::Bool(b) => *b == positive,
            Guard::Cmp(op, l, r) => {
                let a = l.eval(vals, t)?;
                let b = r.eval(vals, t)?;
                // Under negation `<` turns into `>=`, and so on.
                let op = if positive { *op } else { negate(*op) };
                match op {
                    CmpOp::Lt => a < b + delta,
                    CmpOp::Le => a <= b + delta,
                    CmpOp::Gt => a > b - delta,
                    CmpOp::Ge => a >= b - delta,
                }
            }
            Guard::And(x, y) if positive => {
                x.holds_polar(vals, t, delta, true)? && y.holds_polar(vals, t, delta, true)?
            }
            Guard::And(x, y) => {
                x.holds_polar(vals, t, delta, false)? || y.holds_polar(vals, t, delta, false)?
            }
            Guard::Or(x, y) if positive => {
                x.holds_polar(vals, t, delta, true)? || y.holds_polar(vals, t, delta, true)?
            }
            Guard::Or(x, y) => {
                x.holds_polar(vals, t, delta, false)? && y.holds_polar(vals, t, delta, false)?
            }
            Guard::Not(g) => g.holds_polar(vals, t, delta, !positive)?,
        })
    }

    /// Signed robustness: positive inside the guard, negative outside, with
    /// magnitude equal to the smallest atom slack. An atom relaxed by `delta`
    /// holds wherever the margin exceeds `-delta`.
    pub fn margin(&self, vals: &[f64], t: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Guard::Bool(true) => f64::INFINITY,
            Guard::Bool(false) => f64::NEG_INFINITY,
            Guard::Cmp(op, l, r) => {
                let a = l.eval(vals, t)?;
                let b = r.eval(vals, t)?;
                match op {
                    CmpOp::Lt | CmpOp::Le => b - a,
                    CmpOp::Gt | CmpOp::Ge => a - b,
                }
            }
            Guard::And(x, y) => x.margin(vals, t)?.min(y.margin(vals, t)?),
            Guard::Or(x, y) => x.margin(vals, t)?.max(y.margin(vals, t)?),
            Guard::Not(g) => -g.margin(vals, t)?,
        })
    }

    /// Whether every comparison in the guard is strict. Only then does a
    /// positive margin coincide exactly with satisfaction.
    pub fn is_strict(&self) -> bool {
        match self {
            Guard::Bool(_) => true,
            Guard::Cmp(op, _, _) => op.is_strict(),
            Guard::And(a, b) | Guard::Or(a, b) => a.is_strict() && b.is_strict(),
            Guard::Not(g) => g.is_strict_negated(),
        }
    }

    /// Strictness of the negation of `self`.
    fn is_strict_negated(&self) -> bool {
        match self {
            Guard::Bool(_) => true,
            Guard::Cmp(op, _, _) => !op.is_strict(),
            Guard::And(a, b) | Guard::Or(a, b) => a.is_strict_negated() && b.is_strict_negated(),
            Guard::Not(g) => g.is_strict(),
        }
    }
}

fn negate(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Ge,
        CmpOp::Le => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Le,
        CmpOp::Ge => CmpOp::Lt,
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Bool(b) => write!(f, "{b}"),
            Guard::Cmp(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Guard::And(a, b) => write!(f, "({a} && {b})"),
            Guard::Or(a, b) => write!(f, "({a} || {b})"),
            Guard::Not(g) => write!(f, "(!{g})"),
        }
    }
}

/// Names an expression may refer to, plus named constants substituted at
/// parse time.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    vars: Vec<Arc<str>>,
    params: IndexMap<String, f64>,
}

impl Scope {
    pub fn new<S: AsRef<str>>(vars: &[S]) -> Scope {
        Scope {
            vars: vars.iter().map(|v| Arc::from(v.as_ref())).collect(),
            params: IndexMap::new(),
        }
    }

    pub fn with_params(mut self, params: IndexMap<String, f64>) -> Scope {
        self.params = params;
        self
    }

    fn lookup_var(&self, name: &str) -> Option<(usize, Arc<str>)> {
        self.vars.iter().position(|v| &**v == name).map(|i| (i, self.vars[i].clone()))
    }
}

pub fn parse_expr(text: &str, scope: &Scope) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text, scope)?;
    let e = p.expr()?;
    p.expect_end()?;
    Ok(e)
}

pub fn parse_guard(text: &str, scope: &Scope) -> Result<Guard, ParseError> {
    let mut p = Parser::new(text, scope)?;
    let g = p.guard()?;
    p.expect_end()?;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    End,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(x) => format!("number {x}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::End => "end of input".to_string(),
        other => format!("{other:?}"),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let column = i + 1;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                column,
                message: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(value), column));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            let tok = match word {
                "and" => Tok::AndAnd,
                "or" => Tok::OrOr,
                "not" => Tok::Bang,
                _ => Tok::Ident(word.to_string()),
            };
            out.push((tok, column));
            continue;
        }
        let two = if i + 1 < bytes.len() { &text[i..i + 2] } else { "" };
        let (tok, width) = match two {
            "<=" => (Tok::Le, 2),
            ">=" => (Tok::Ge, 2),
            "==" => (Tok::Eq, 2),
            "!=" => (Tok::Ne, 2),
            "&&" => (Tok::AndAnd, 2),
            "||" => (Tok::OrOr, 2),
            _ => match c {
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                '*' => (Tok::Star, 1),
                '/' => (Tok::Slash, 1),
                '^' => (Tok::Caret, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '<' => (Tok::Lt, 1),
                '>' => (Tok::Gt, 1),
                '=' => (Tok::Eq, 1),
                '!' => (Tok::Bang, 1),
                _ => {
                    return Err(ParseError::Syntax {
                        column,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            },
        };
        out.push((tok, column));
        i += width;
    }
    out.push((Tok::End, text.len() + 1));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    scope: &'a Scope,
}

impl<'a> Parser<'a> {
    fn new(text: &str, scope: &'a Scope) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(text)?, pos: 0, scope })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { column: self.column(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected {}, found {}", describe(&tok), describe(self.peek())))
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::End => Ok(()),
            Tok::Eq | Tok::Ne => Err(ParseError::Equality { column: self.column() }),
            other => self.syntax(format!("unexpected {}", describe(other))),
        }
    }

    // guard := or
    fn guard(&mut self) -> Result<Guard, ParseError> {
        let mut g = self.guard_and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.guard_and()?;
            g = Guard::or(g, rhs);
        }
        Ok(g)
    }

    fn guard_and(&mut self) -> Result<Guard, ParseError> {
        let mut g = self.guard_unary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.guard_unary()?;
            g = Guard::and(g, rhs);
        }
        Ok(g)
    }

    fn guard_unary(&mut self) -> Result<Guard, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Guard::Not(Box::new(self.guard_unary()?)))
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Guard::Bool(w == "true"))
            }
            Tok::LParen => {
                // Either a parenthesised guard or an atom whose left side
                // starts with a parenthesised expression.
                let save = self.pos;
                self.bump();
                if let Ok(g) = self.guard() {
                    if *self.peek() == Tok::RParen {
                        self.bump();
                        if !is_comparison(self.peek()) && !is_arith(self.peek()) {
                            return Ok(g);
                        }
                    }
                }
                self.pos = save;
                self.atom()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Guard, ParseError> {
        let lhs = self.expr()?;
        let column = self.column();
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::Eq | Tok::Ne => return Err(ParseError::Equality { column }),
            other => {
                return self.syntax(format!("expected a comparison operator, found {}", describe(other)))
            }
        };
        self.bump();
        let rhs = self.expr()?;
        if matches!(self.peek(), Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge) {
            return self.syntax("chained comparisons are not supported; combine atoms with &&");
        }
        Ok(Guard::cmp(op, lhs, rhs))
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(e),
            };
            self.bump();
            let rhs = self.term()?;
            e = Expr::binary(op, e, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(e),
            };
            self.bump();
            let rhs = self.unary()?;
            e = Expr::binary(op, e, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            // A minus directly before a literal that is not raised to a power
            // folds into a negative constant.
            if let Tok::Num(x) = *self.peek_at(1) {
                if *self.peek_at(2) != Tok::Caret {
                    self.bump();
                    self.bump();
                    return Ok(Expr::Const(-x));
                }
            }
            self.bump();
            let e = self.unary()?;
            return Ok(Expr::unary(UnaryOp::Neg, e));
        }
        self.power()
    }

    // power := primary ('^' unary)?   (right associative)
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let column = self.column();
        match self.bump() {
            Tok::Num(x) => Ok(Expr::Const(x)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(op) = UnaryOp::from_function_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return self.syntax(format!("expected `(` after function `{name}`"));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::unary(op, arg));
                }
                if name == "t" {
                    return Ok(Expr::Time);
                }
                if let Some((index, name)) = self.scope.lookup_var(&name) {
                    return Ok(Expr::Var(VarRef { index, name }));
                }
                if let Some(value) = self.scope.params.get(&name) {
                    return Ok(Expr::Const(*value));
                }
                Err(ParseError::UnknownIdentifier { name, column })
            }
            other => Err(ParseError::Syntax {
                column,
                message: format!("expected an operand, found {}", describe(&other)),
            }),
        }
    }
}

fn is_comparison(t: &Tok) -> bool {
    matches!(t, Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::Eq | Tok::Ne)
}

fn is_arith(t: &Tok) -> bool {
    matches!(t, Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::Caret)
}
