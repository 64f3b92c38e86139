//! Expression language for generating processes `X(t) = f(t, W(t))`.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! list    = expr { "," expr } ;
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;             (* right-associative *)
//! atom    = number | variable | func "(" expr ")" | "(" expr ")" ;
//! variable = "t" | "w1" | ... | "wd" ;       (* "u" for functions of one argument *)
//! func    = "neg" | "sin" | "cos" | "exp" | "log" | "sqrt" | "abs" | "tanh" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! `^` binds tighter than unary minus, so `-2^2` is `-4`. There is no implicit
//! multiplication. Error positions are 0-based character offsets.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("lexical error at position {pos}: unknown token `{token}`")]
    Lexical { pos: usize, token: String },
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("dimension error at position {pos}: {message}")]
    Dimension { pos: usize, message: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Lexical { pos, .. }
            | ParseError::Syntax { pos, .. }
            | ParseError::Dimension { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain error in `{op}` at node `{node}`")]
pub struct DomainError {
    pub op: &'static str,
    pub node: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Time,
    /// Zero-based Brownian component; printed as `w{index + 1}`.
    Brownian(usize),
    /// The single argument `u` of a scalar function such as a test function G.
    Arg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "neg" => UnaryOp::Neg,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            "tanh" => UnaryOp::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluates the expression. `w` supplies the Brownian components and
    /// `arg` the value of `u`.
    pub fn eval(&self, t: f64, w: &[f64], arg: f64) -> Result<f64, DomainError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(Var::Time) => Ok(t),
            Expr::Var(Var::Brownian(i)) => Ok(w[*i]),
            Expr::Var(Var::Arg) => Ok(arg),
            Expr::Unary(op, inner) => {
                let v = inner.eval(t, w, arg)?;
                let out = match op {
                    UnaryOp::Neg => -v,
                    UnaryOp::Sin => v.sin(),
                    UnaryOp::Cos => v.cos(),
                    UnaryOp::Exp => v.exp(),
                    UnaryOp::Log if v <= 0.0 || v.is_nan() => return Err(self.domain(op.name())),
                    UnaryOp::Log => v.ln(),
                    UnaryOp::Sqrt if v < 0.0 || v.is_nan() => return Err(self.domain(op.name())),
                    UnaryOp::Sqrt => v.sqrt(),
                    UnaryOp::Abs => v.abs(),
                    UnaryOp::Tanh => v.tanh(),
                };
                Ok(out)
            }
            Expr::Binary(op, lhs, rhs) => {
                let a = lhs.eval(t, w, arg)?;
                let b = rhs.eval(t, w, arg)?;
                match op {
                    BinaryOp::Add => Ok(a + b),
                    BinaryOp::Sub => Ok(a - b),
                    BinaryOp::Mul => Ok(a * b),
                    BinaryOp::Div if b == 0.0 => Err(self.domain("/")),
                    BinaryOp::Div => Ok(a / b),
                    BinaryOp::Pow => {
                        let p = a.powf(b);
                        if p.is_nan() && !a.is_nan() && !b.is_nan() {
                            Err(self.domain("^"))
                        } else {
                            Ok(p)
                        }
                    }
                }
            }
        }
    }

    fn domain(&self, op: &'static str) -> DomainError {
        DomainError {
            op,
            node: self.to_string(),
        }
    }

    pub fn references_brownian(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => matches!(v, Var::Brownian(_)),
            Expr::Unary(_, e) => e.references_brownian(),
            Expr::Binary(_, a, b) => a.references_brownian() || b.references_brownian(),
        }
    }
}

/// Fully parenthesized rendering; re-parses to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(Var::Time) => f.write_str("t"),
            Expr::Var(Var::Brownian(i)) => write!(f, "w{}", i + 1),
            Expr::Var(Var::Arg) => f.write_str("u"),
            Expr::Unary(UnaryOp::Neg, e) => write!(f, "(-{e})"),
            Expr::Unary(op, e) => write!(f, "{}({e})", op.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    Deterministic,
    MarkovFunctional,
}

/// A d-dimensional generating process, one expression per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    source: String,
    components: Vec<Expr>,
    kind: ProcessKind,
}

impl ProcessSpec {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn is_deterministic(&self) -> bool {
        self.kind == ProcessKind::Deterministic
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Source text as given to [`parse_process`].
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Writes `X(t, w)` into `out`; `w` and `out` have length `dim()`.
    pub fn eval_into(&self, t: f64, w: &[f64], out: &mut [f64]) -> Result<(), DomainError> {
        for (slot, c) in out.iter_mut().zip(&self.components) {
            *slot = c.eval(t, w, 0.0)?;
        }
        Ok(())
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Parses a comma-separated list of `d` component expressions over `t, w1..wd`.
pub fn parse_process(source: &str, d: usize) -> Result<ProcessSpec, ParseError> {
    if d == 0 {
        return Err(ParseError::Dimension {
            pos: 0,
            message: "dimension must be positive".into(),
        });
    }
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens: &tokens,
        at: 0,
        end: source.chars().count(),
        vars: VarScope::Process { dim: d },
    };
    let mut components = vec![parser.expr()?];
    while parser.eat(&Tok::Comma) {
        if components.len() == d {
            return Err(ParseError::Dimension {
                pos: parser.prev_pos(),
                message: format!("more than {d} component(s)"),
            });
        }
        components.push(parser.expr()?);
    }
    parser.expect_end()?;
    if components.len() != d {
        return Err(ParseError::Dimension {
            pos: parser.end,
            message: format!("expected {d} component(s), found {}", components.len()),
        });
    }
    let kind = if components.iter().any(Expr::references_brownian) {
        ProcessKind::MarkovFunctional
    } else {
        ProcessKind::Deterministic
    };
    Ok(ProcessSpec {
        source: source.to_string(),
        components,
        kind,
    })
}

/// Parses a scalar function of the single variable `u`.
pub fn parse_function(source: &str) -> Result<Expr, ParseError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens: &tokens,
        at: 0,
        end: source.chars().count(),
        vars: VarScope::Argument,
    };
    let e = parser.expr()?;
    parser.expect_end()?;
    Ok(e)
}

/// Evaluates `spec` at `(t, w)`, returning the d components.
pub fn eval_process(spec: &ProcessSpec, t: f64, w: &[f64]) -> Result<Vec<f64>, DomainError> {
    let mut out = vec![0.0; spec.dim()];
    spec.eval_into(t, w, &mut out)?;
    Ok(out)
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
    Comma,
}

fn lex(source: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push((tok, start));
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ParseError::Lexical {
                pos: start,
                token: text.clone(),
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else {
            return Err(ParseError::Lexical {
                pos: start,
                token: c.to_string(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum VarScope {
    Process { dim: usize },
    Argument,
}

struct Parser<'a> {
    tokens: &'a [(Tok, usize)],
    at: usize,
    end: usize,
    vars: VarScope,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn prev_pos(&self) -> usize {
        self.tokens[self.at - 1].1
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            message: message.into(),
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(Tok::RParen) => Err(self.syntax("unbalanced `)`")),
            Some(_) => Err(self.syntax("expected operator or end of input")),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinaryOp::Add,
                Some(Tok::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinaryOp::Mul,
                Some(Tok::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(&Tok::Caret) {
            let exponent = self.unary()?;
            return Ok(Expr::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let Some(tok) = self.peek().cloned() else {
            return Err(self.syntax("missing operand"));
        };
        match tok {
            Tok::Num(v) => {
                self.at += 1;
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.at += 1;
                let inner = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.syntax("unbalanced `(`: expected `)`"));
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.at += 1;
                if let Some(op) = UnaryOp::from_name(&name) {
                    if !self.eat(&Tok::LParen) {
                        return Err(self.syntax(format!("expected `(` after `{name}`")));
                    }
                    let inner = self.expr()?;
                    if !self.eat(&Tok::RParen) {
                        return Err(self.syntax("unbalanced `(`: expected `)`"));
                    }
                    return Ok(Expr::Unary(op, Box::new(inner)));
                }
                self.variable(&name, pos).map(Expr::Var)
            }
            _ => Err(self.syntax("missing operand")),
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<Var, ParseError> {
        match self.vars {
            VarScope::Process { dim } => {
                if name == "t" {
                    return Ok(Var::Time);
                }
                if let Some(digits) = name.strip_prefix('w') {
                    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                        let index: usize = digits.parse().unwrap_or(usize::MAX);
                        if index == 0 || index > dim {
                            return Err(ParseError::Dimension {
                                pos,
                                message: format!("`{name}` outside w1..w{dim}"),
                            });
                        }
                        return Ok(Var::Brownian(index - 1));
                    }
                }
            }
            VarScope::Argument => {
                if name == "u" {
                    return Ok(Var::Arg);
                }
            }
        }
        Err(ParseError::Lexical {
            pos,
            token: name.to_string(),
        })
    }
}
