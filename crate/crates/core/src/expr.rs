//! Closed-form expressions in `theta` and `v` with exact symbolic derivatives.
//!
//! Grammar (precedence low to high):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := base ('^' unary)?
//! base  := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-theta^2`
//! is `-(theta^2)` and `2^-1` is `0.5`. The only functions are `exp` and `ln`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The two state variables an equation of state may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Theta,
    V,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::Theta => "theta",
            Var::V => "v",
        }
    }
}

impl FromStr for Var {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Var::Theta),
            "v" => Ok(Var::V),
            other => Err(Error::MissingBinding(other.to_string())),
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

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    /// A named constant, resolved through [`Bindings`].
    Name(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values for variables and named constants.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }
}

impl From<BTreeMap<String, f64>> for Bindings {
    fn from(map: BTreeMap<String, f64>) -> Self {
        Bindings(map)
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(Error::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(expr)
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

impl Expr {
    pub fn eval(&self, b: &Bindings) -> Result<f64> {
        let lookup = |name: &str| b.get(name).ok_or_else(|| Error::MissingBinding(name.into()));
        let x = self.eval_with(&|var| lookup(var.name()), &lookup)?;
        finite(x, "result")
    }

    /// Evaluates an expression whose constants have already been substituted.
    pub fn eval_at(&self, theta: f64, v: f64) -> Result<f64> {
        let x = self.eval_with(
            &|var| {
                Ok(match var {
                    Var::Theta => theta,
                    Var::V => v,
                })
            },
            &|name| Err(Error::MissingBinding(name.into())),
        )?;
        finite(x, "result")
    }

    fn eval_with(
        &self,
        var: &dyn Fn(Var) -> Result<f64>,
        name: &dyn Fn(&str) -> Result<f64>,
    ) -> Result<f64> {
        match self {
            Expr::Num(x) => Ok(*x),
            Expr::Var(v) => var(*v),
            Expr::Name(n) => name(n),
            Expr::Neg(a) => Ok(-a.eval_with(var, name)?),
            Expr::Binary(op, a, b) => {
                let x = a.eval_with(var, name)?;
                let y = b.eval_with(var, name)?;
                apply_binary(*op, x, y)
            }
            Expr::Call(f, a) => apply_call(*f, a.eval_with(var, name)?),
        }
    }

    /// Every variable and constant name referenced by the expression.
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.name().to_string());
            }
            Expr::Name(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_names(out),
            Expr::Binary(_, a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Name(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Replaces named constants by their values and folds constant subtrees.
    pub fn substitute(&self, constants: &Bindings) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Name(n) => match constants.get(n) {
                Some(x) => Expr::Num(x),
                None => self.clone(),
            },
            Expr::Neg(a) => neg(a.substitute(constants)),
            Expr::Binary(op, a, b) => {
                binary(*op, a.substitute(constants), b.substitute(constants))
            }
            Expr::Call(f, a) => call(*f, a.substitute(constants)),
        }
    }

    /// Exact derivative with respect to `var`, simplified only by constant folding.
    pub fn differentiate(&self, var: Var) -> Expr {
        match self {
            Expr::Num(_) | Expr::Name(_) => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(var)),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.as_ref(), b.as_ref());
                match op {
                    BinOp::Add => add(a.differentiate(var), b.differentiate(var)),
                    BinOp::Sub => sub(a.differentiate(var), b.differentiate(var)),
                    BinOp::Mul => add(
                        mul(a.differentiate(var), b.clone()),
                        mul(a.clone(), b.differentiate(var)),
                    ),
                    BinOp::Div => div(
                        sub(
                            mul(a.differentiate(var), b.clone()),
                            mul(a.clone(), b.differentiate(var)),
                        ),
                        pow(b.clone(), Expr::Num(2.0)),
                    ),
                    BinOp::Pow => {
                        if !b.depends_on(var) {
                            mul(
                                mul(b.clone(), pow(a.clone(), sub(b.clone(), Expr::Num(1.0)))),
                                a.differentiate(var),
                            )
                        } else if !a.depends_on(var) {
                            mul(
                                mul(self.clone(), call(Func::Ln, a.clone())),
                                b.differentiate(var),
                            )
                        } else {
                            // d(a^b) = a^b (b' ln a + b a' / a)
                            mul(
                                self.clone(),
                                add(
                                    mul(b.differentiate(var), call(Func::Ln, a.clone())),
                                    div(mul(b.clone(), a.differentiate(var)), a.clone()),
                                ),
                            )
                        }
                    }
                }
            }
            Expr::Call(Func::Exp, a) => mul(self.clone(), a.differentiate(var)),
            Expr::Call(Func::Ln, a) => div(a.differentiate(var), a.as_ref().clone()),
        }
    }
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Domain(format!("non-finite {what}")))
    }
}

fn apply_binary(op: BinOp, x: f64, y: f64) -> Result<f64> {
    match op {
        BinOp::Add => Ok(x + y),
        BinOp::Sub => Ok(x - y),
        BinOp::Mul => Ok(x * y),
        BinOp::Div => {
            if y == 0.0 {
                Err(Error::Domain("division by zero".into()))
            } else {
                Ok(x / y)
            }
        }
        BinOp::Pow => finite(x.powf(y), "power"),
    }
}

fn apply_call(f: Func, x: f64) -> Result<f64> {
    match f {
        Func::Exp => finite(x.exp(), "exp"),
        Func::Ln => {
            if x <= 0.0 {
                Err(Error::Domain(format!("ln of non-positive value {x}")))
            } else {
                Ok(x.ln())
            }
        }
    }
}

fn num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(x) => Some(*x),
        _ => None,
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Add, a, b)
}

fn sub(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Sub, a, b)
}

fn mul(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Mul, a, b)
}

fn div(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Div, a, b)
}

fn pow(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Pow, a, b)
}

fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (num(&a), num(&b)) {
        if let Ok(z) = apply_binary(op, x, y) {
            if z.is_finite() {
                return Expr::Num(z);
            }
        }
    }
    let (x, y) = (num(&a), num(&b));
    match op {
        BinOp::Add if x == Some(0.0) => return b,
        BinOp::Add | BinOp::Sub if y == Some(0.0) => return a,
        BinOp::Sub if x == Some(0.0) => return neg(b),
        BinOp::Mul if x == Some(0.0) || y == Some(0.0) => return Expr::Num(0.0),
        BinOp::Mul if x == Some(1.0) => return b,
        BinOp::Mul | BinOp::Div if y == Some(1.0) => return a,
        BinOp::Div if x == Some(0.0) => return Expr::Num(0.0),
        BinOp::Pow if y == Some(1.0) => return a,
        BinOp::Pow if y == Some(0.0) => return Expr::Num(1.0),
        _ => {}
    }
    Expr::Binary(op, Box::new(a), Box::new(b))
}

fn call(f: Func, a: Expr) -> Expr {
    if let Some(x) = num(&a) {
        if let Ok(y) = apply_call(f, x) {
            return Expr::Num(y);
        }
    }
    Expr::Call(f, Box::new(a))
}

impl fmt::Display for Expr {
    /// Fully parenthesized; numbers use the shortest round-trip representation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => {
                write!(f, "(-{:?})", -x)
            }
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Name(n) => f.write_str(n),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(x) => format!("number {x}"),
            TokenKind::Ident(s) => format!("name `{s}`"),
            TokenKind::Op(c) => format!("`{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push(Token {
                    kind: TokenKind::Op(c as char),
                    offset: start,
                });
                i += 1;
            }
            b'(' | b')' => {
                out.push(Token {
                    kind: if c == b'(' {
                        TokenKind::LParen
                    } else {
                        TokenKind::RParen
                    },
                    offset: start,
                });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let value = lit.parse::<f64>().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                out.push(Token {
                    kind: TokenKind::Num(value),
                    offset: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    /// Offset reported when input ends early: the last token consumed.
    fn eof_offset(&self) -> usize {
        self.tokens.last().map(|t| t.offset).unwrap_or(0)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let Some(tok) = self.next() else {
            return Err(Error::Syntax {
                offset: self.eof_offset(),
                message: "expected an operand".into(),
            });
        };
        match tok.kind {
            TokenKind::Num(x) => Ok(Expr::Num(x)),
            TokenKind::Ident(name) => {
                if matches!(self.peek(), Some(Token { kind: TokenKind::LParen, .. })) {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "ln" => Func::Ln,
                        _ => {
                            return Err(Error::UnknownFunction {
                                name,
                                offset: tok.offset,
                            })
                        }
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen(tok.offset)?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Ok(match name.as_str() {
                    "theta" => Expr::Var(Var::Theta),
                    "v" => Expr::Var(Var::V),
                    _ => Expr::Name(name),
                })
            }
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen(tok.offset)?;
                Ok(inner)
            }
            other => Err(Error::Syntax {
                offset: tok.offset,
                message: format!("expected an operand, found {}", other.describe()),
            }),
        }
    }

    fn expect_rparen(&mut self, open: usize) -> Result<()> {
        match self.next() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => Ok(()),
            Some(tok) => Err(Error::Syntax {
                offset: tok.offset,
                message: format!("expected `)`, found {}", tok.kind.describe()),
            }),
            None => Err(Error::Syntax {
                offset: open,
                message: "unclosed `(`".into(),
            }),
        }
    }
}
