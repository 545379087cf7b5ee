//! A small closed-form expression language over variables `x1..xm`.
//!
//! Grammar (highest precedence first): `^` (right-associative), unary `-`,
//! `*` `/`, `+` `-`; parenthesized subexpressions; function calls
//! `sin cos exp log sqrt tanh`; constants `pi` and `e` (folded to literals
//! at parse time). Differentiation is exact and symbolic, followed by a
//! light simplification pass (constant folding and 0/1 elimination), so
//! derivative trees stay readable and cheap to evaluate.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier {name:?} at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable {name} at byte {offset} is out of range for {nvars} variable(s)")]
    VariableOutOfRange {
        name: String,
        offset: usize,
        nvars: usize,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("log of a non-positive value")]
    LogNonpositive,
    #[error("square root of a negative value")]
    SqrtNegative,
    #[error("division by zero")]
    DivisionByZero,
    #[error("power with non-integer exponent requires a positive base")]
    PowDomain,
    #[error("expression over {expected} variable(s) evaluated at a point of dimension {got}")]
    WrongArity { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, v: f64) -> Result<f64, EvalError> {
        match self {
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
            Func::Exp => Ok(v.exp()),
            Func::Log => {
                if v <= 0.0 {
                    Err(EvalError::LogNonpositive)
                } else {
                    Ok(v.ln())
                }
            }
            Func::Sqrt => {
                if v < 0.0 {
                    Err(EvalError::SqrtNegative)
                } else {
                    Ok(v.sqrt())
                }
            }
            Func::Tanh => Ok(v.tanh()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// An immutable expression over a fixed number of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    nvars: usize,
}

// ---------------------------------------------------------------- lexer --

#[derive(Clone, Debug, PartialEq)]
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
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let c = self.src[self.pos];
        let single = |t| Ok((t, start));
        match c {
            b'+' => {
                self.pos += 1;
                single(Tok::Plus)
            }
            b'-' => {
                self.pos += 1;
                single(Tok::Minus)
            }
            b'*' => {
                self.pos += 1;
                single(Tok::Star)
            }
            b'/' => {
                self.pos += 1;
                single(Tok::Slash)
            }
            b'^' => {
                self.pos += 1;
                single(Tok::Caret)
            }
            b'(' => {
                self.pos += 1;
                single(Tok::LParen)
            }
            b')' => {
                self.pos += 1;
                single(Tok::RParen)
            }
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
                if end < self.src.len() && self.src[end] == b'.' {
                    end += 1;
                    while end < self.src.len() && self.src[end].is_ascii_digit() {
                        end += 1;
                    }
                }
                if end == self.pos || (end == self.pos + 1 && c == b'.') {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: "malformed number".into(),
                    });
                }
                // Exponent part only if followed by digits (so "2*e" still
                // lexes "e" as an identifier).
                if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
                    let mut probe = end + 1;
                    if probe < self.src.len() && (self.src[probe] == b'+' || self.src[probe] == b'-')
                    {
                        probe += 1;
                    }
                    if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                        while probe < self.src.len() && self.src[probe].is_ascii_digit() {
                            probe += 1;
                        }
                        end = probe;
                    }
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number {text:?}"),
                })?;
                self.pos = end;
                Ok((Tok::Num(v), start))
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let name = std::str::from_utf8(&self.src[self.pos..end]).unwrap().to_string();
                self.pos = end;
                Ok((Tok::Ident(name), start))
            }
            _ => Err(ParseError::Syntax {
                offset: start,
                message: format!("unexpected byte {:?}", c as char),
            }),
        }
    }
}

// --------------------------------------------------------------- parser --

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    nvars: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let (tok, offset) = self.bump();
        if tok == want {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset,
                message: format!("expected {what}"),
            })
        }
    }

    fn additive(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.multiplicative()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.multiplicative()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn multiplicative(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek().0 == Tok::Minus {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek().0 == Tok::Caret {
            self.bump();
            // Right-associative; the exponent may carry a unary minus.
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.additive()?;
                self.expect(Tok::RParen, "closing ')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(name, offset),
            other => Err(ParseError::Syntax {
                offset,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Node, ParseError> {
        match name.as_str() {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "sin" | "cos" | "exp" | "log" | "sqrt" | "tanh" => {
                let func = match name.as_str() {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    "sqrt" => Func::Sqrt,
                    _ => Func::Tanh,
                };
                self.expect(Tok::LParen, &format!("'(' after {name}"))?;
                let arg = self.additive()?;
                self.expect(Tok::RParen, "closing ')'")?;
                return Ok(Node::Call(func, Box::new(arg)));
            }
            _ => {}
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                let k: usize = rest.parse().map_err(|_| ParseError::Syntax {
                    offset,
                    message: "variable index too large".into(),
                })?;
                if k == 0 || k > self.nvars {
                    return Err(ParseError::VariableOutOfRange {
                        name,
                        offset,
                        nvars: self.nvars,
                    });
                }
                return Ok(Node::Var(k - 1));
            }
        }
        Err(ParseError::UnknownIdentifier { name, offset })
    }
}

// ------------------------------------------------------------ operations --

fn pow_eval(base: f64, exp: f64) -> Result<f64, EvalError> {
    if exp.fract() == 0.0 && exp.abs() <= 2147483647.0 {
        if base == 0.0 && exp < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        return Ok(base.powi(exp as i32));
    }
    if base < 0.0 {
        return Err(EvalError::PowDomain);
    }
    Ok(base.powf(exp))
}

impl Node {
    fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        match self {
            Node::Num(v) => Ok(*v),
            Node::Var(i) => Ok(x[*i]),
            Node::Neg(a) => Ok(-a.eval(x)?),
            Node::Add(a, b) => Ok(a.eval(x)? + b.eval(x)?),
            Node::Sub(a, b) => Ok(a.eval(x)? - b.eval(x)?),
            Node::Mul(a, b) => Ok(a.eval(x)? * b.eval(x)?),
            Node::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                Ok(a.eval(x)? / d)
            }
            Node::Pow(a, b) => pow_eval(a.eval(x)?, b.eval(x)?),
            Node::Call(f, a) => f.apply(a.eval(x)?),
        }
    }

    fn derivative(&self, var: usize) -> Node {
        use Node::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => Neg(Box::new(a.derivative(var))),
            Add(a, b) => Add(Box::new(a.derivative(var)), Box::new(b.derivative(var))),
            Sub(a, b) => Sub(Box::new(a.derivative(var)), Box::new(b.derivative(var))),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.derivative(var)), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.derivative(var)))),
            ),
            Div(a, b) => Div(
                Box::new(Sub(
                    Box::new(Mul(Box::new(a.derivative(var)), b.clone())),
                    Box::new(Mul(a.clone(), Box::new(b.derivative(var)))),
                )),
                Box::new(Pow(b.clone(), Box::new(Num(2.0)))),
            ),
            Pow(a, b) => {
                if let Num(n) = **b {
                    // Power rule with constant exponent: n·a^(n-1)·a'.
                    return Mul(
                        Box::new(Mul(
                            Box::new(Num(n)),
                            Box::new(Pow(a.clone(), Box::new(Num(n - 1.0)))),
                        )),
                        Box::new(a.derivative(var)),
                    );
                }
                // General case: a^b · (b' log a + b a'/a), requires a > 0.
                Mul(
                    Box::new(self.clone()),
                    Box::new(Add(
                        Box::new(Mul(
                            Box::new(b.derivative(var)),
                            Box::new(Call(Func::Log, a.clone())),
                        )),
                        Box::new(Div(
                            Box::new(Mul(b.clone(), Box::new(a.derivative(var)))),
                            a.clone(),
                        )),
                    )),
                )
            }
            Call(f, a) => {
                let da = Box::new(a.derivative(var));
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(Box::new(Call(Func::Sin, a.clone()))),
                    Func::Exp => Call(Func::Exp, a.clone()),
                    Func::Log => Div(Box::new(Num(1.0)), a.clone()),
                    Func::Sqrt => Div(
                        Box::new(Num(0.5)),
                        Box::new(Call(Func::Sqrt, a.clone())),
                    ),
                    Func::Tanh => Sub(
                        Box::new(Num(1.0)),
                        Box::new(Pow(
                            Box::new(Call(Func::Tanh, a.clone())),
                            Box::new(Num(2.0)),
                        )),
                    ),
                };
                Mul(Box::new(outer), da)
            }
        }
    }

    fn is_num(&self, v: f64) -> bool {
        matches!(self, Node::Num(w) if *w == v)
    }

    fn simplify(self) -> Node {
        use Node::*;
        let node = match self {
            Neg(a) => Neg(Box::new(a.simplify())),
            Add(a, b) => Add(Box::new(a.simplify()), Box::new(b.simplify())),
            Sub(a, b) => Sub(Box::new(a.simplify()), Box::new(b.simplify())),
            Mul(a, b) => Mul(Box::new(a.simplify()), Box::new(b.simplify())),
            Div(a, b) => Div(Box::new(a.simplify()), Box::new(b.simplify())),
            Pow(a, b) => Pow(Box::new(a.simplify()), Box::new(b.simplify())),
            Call(f, a) => Call(f, Box::new(a.simplify())),
            other => other,
        };
        match node {
            Neg(a) => match *a {
                Num(v) => Num(-v),
                Neg(inner) => *inner,
                other => Neg(Box::new(other)),
            },
            Add(a, b) => match (&*a, &*b) {
                (Num(x), Num(y)) => Num(x + y),
                _ if a.is_num(0.0) => *b,
                _ if b.is_num(0.0) => *a,
                _ => Add(a, b),
            },
            Sub(a, b) => match (&*a, &*b) {
                (Num(x), Num(y)) => Num(x - y),
                _ if b.is_num(0.0) => *a,
                _ if a.is_num(0.0) => Neg(b).simplify(),
                _ => Sub(a, b),
            },
            Mul(a, b) => match (&*a, &*b) {
                (Num(x), Num(y)) => Num(x * y),
                _ if a.is_num(0.0) || b.is_num(0.0) => Num(0.0),
                _ if a.is_num(1.0) => *b,
                _ if b.is_num(1.0) => *a,
                _ => Mul(a, b),
            },
            Div(a, b) => match (&*a, &*b) {
                (Num(x), Num(y)) if *y != 0.0 => Num(x / y),
                _ if a.is_num(0.0) && !b.is_num(0.0) => Num(0.0),
                _ if b.is_num(1.0) => *a,
                _ => Div(a, b),
            },
            Pow(a, b) => match (&*a, &*b) {
                (Num(x), Num(y)) => match pow_eval(*x, *y) {
                    Ok(v) => Num(v),
                    Err(_) => Pow(a, b),
                },
                _ if b.is_num(1.0) => *a,
                _ if b.is_num(0.0) => Num(1.0),
                _ => Pow(a, b),
            },
            other => other,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(..) => 3,
            Node::Pow(..) => 4,
            Node::Num(v) if *v < 0.0 => 3, // prints with a leading '-'
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let prec = self.precedence();
        if prec < parent {
            write!(f, "(")?;
            self.fmt_inner(f)?;
            write!(f, ")")
        } else {
            self.fmt_inner(f)
        }
    }

    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3)
            }
            Node::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)
            }
            Node::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)
            }
            Node::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)
            }
            Node::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)
            }
            Node::Pow(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^")?;
                b.fmt_prec(f, 3)
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_inner(f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_inner(f)
    }
}

impl Expr {
    /// Parses `text` over variables `x1..x{nvars}`.
    pub fn parse(text: &str, nvars: usize) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(text);
        let mut toks = Vec::new();
        loop {
            let (tok, offset) = lexer.next()?;
            let done = tok == Tok::Eof;
            toks.push((tok, offset));
            if done {
                break;
            }
        }
        let mut parser = Parser { toks, at: 0, nvars };
        let root = parser.additive()?;
        let (tok, offset) = parser.bump();
        if tok != Tok::Eof {
            return Err(ParseError::Syntax {
                offset,
                message: format!("trailing input starting with {tok:?}"),
            });
        }
        Ok(Expr { root, nvars })
    }

    /// The literal zero expression.
    pub fn zero(nvars: usize) -> Self {
        Expr {
            root: Node::Num(0.0),
            nvars,
        }
    }

    pub fn constant(v: f64, nvars: usize) -> Self {
        Expr {
            root: Node::Num(v),
            nvars,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.root.is_num(0.0)
    }

    /// IEEE double evaluation; domain violations surface as errors.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.nvars {
            return Err(EvalError::WrongArity {
                expected: self.nvars,
                got: x.len(),
            });
        }
        self.root.eval(x)
    }

    /// Exact partial derivative `∂/∂x{var+1}`, simplified.
    pub fn derivative(&self, var: usize) -> Expr {
        assert!(var < self.nvars, "derivative variable out of range");
        Expr {
            root: self.root.derivative(var).simplify(),
            nvars: self.nvars,
        }
    }

    /// Iterated partial derivative for a sequence of variable indices.
    pub fn derivative_seq(&self, vars: &[usize]) -> Expr {
        let mut e = self.clone();
        for &v in vars {
            e = e.derivative(v);
        }
        e
    }

    pub fn simplified(&self) -> Expr {
        Expr {
            root: self.root.clone().simplify(),
            nvars: self.nvars,
        }
    }
}
