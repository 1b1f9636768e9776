//! Arithmetic expressions in the single variable `t`.
//!
//! Grammar (whitespace is ignored between tokens):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := ("-" | "+") factor | base ("^" factor)?
//! base   := FLOAT | "t" | FUNC "(" expr ("," expr)? ")" | "(" expr ")"
//! FUNC   := "exp" | "log" | "min" | "max" | "pow"
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so
//! `-t^2` is `-(t^2)`. Evaluation is forward-mode: every node yields the
//! value together with its derivative in `t`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

/// Value and first derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Expr {
    pub fn eval(&self, t: f64) -> Dual {
        use Expr::*;
        match self {
            Const(c) => Dual { v: *c, d: 0.0 },
            Var => Dual { v: t, d: 1.0 },
            Neg(a) => {
                let a = a.eval(t);
                Dual { v: -a.v, d: -a.d }
            }
            Add(a, b) => {
                let (a, b) = (a.eval(t), b.eval(t));
                Dual { v: a.v + b.v, d: a.d + b.d }
            }
            Sub(a, b) => {
                let (a, b) = (a.eval(t), b.eval(t));
                Dual { v: a.v - b.v, d: a.d - b.d }
            }
            Mul(a, b) => {
                let (a, b) = (a.eval(t), b.eval(t));
                Dual { v: a.v * b.v, d: a.d * b.v + a.v * b.d }
            }
            Div(a, b) => {
                let (a, b) = (a.eval(t), b.eval(t));
                Dual { v: a.v / b.v, d: (a.d * b.v - a.v * b.d) / (b.v * b.v) }
            }
            Pow(a, b) => pow_dual(a.eval(t), b.eval(t), b.is_constant()),
            Exp(a) => {
                let a = a.eval(t);
                let e = a.v.exp();
                Dual { v: e, d: e * a.d }
            }
            Log(a) => {
                let a = a.eval(t);
                Dual { v: a.v.ln(), d: a.d / a.v }
            }
            Min(a, b) => {
                let (a, b) = (a.eval(t), b.eval(t));
                if a.v <= b.v {
                    a
                } else {
                    b
                }
            }
            Max(a, b) => {
                let (a, b) = (a.eval(t), b.eval(t));
                if a.v >= b.v {
                    a
                } else {
                    b
                }
            }
        }
    }

    fn is_constant(&self) -> bool {
        use Expr::*;
        match self {
            Const(_) => true,
            Var => false,
            Neg(a) | Exp(a) | Log(a) => a.is_constant(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) | Min(a, b) | Max(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }
}

fn pow_dual(base: Dual, expo: Dual, constant_exponent: bool) -> Dual {
    let v = base.v.powf(expo.v);
    if constant_exponent {
        // d/dt f^c = c f^(c-1) f'; avoids log of a possibly negative base
        let d = if base.d == 0.0 { 0.0 } else { expo.v * base.v.powf(expo.v - 1.0) * base.d };
        Dual { v, d }
    } else {
        Dual { v, d: v * (expo.d * base.v.ln() + expo.v * base.d / base.v) }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(usize, Tok)>> {
        let mut lx = Lexer { src, toks: Vec::new() };
        lx.lex()?;
        Ok(lx.toks)
    }

    fn lex(&mut self) -> Result<()> {
        let bytes = self.src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part, e.g. 1e-3
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
                let text = &self.src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("invalid number '{text}'"),
                })?;
                self.toks.push((start, Tok::Num(v)));
            } else if c.is_ascii_alphabetic() {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                self.toks.push((start, Tok::Ident(self.src[start..i].to_string())));
            } else if "+-*/^(),".contains(c) {
                self.toks.push((i, Tok::Op(c)));
                i += 1;
            } else {
                return Err(Error::Parse { position: i, message: format!("unexpected character '{c}'") });
            }
        }
        Ok(())
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { position: self.offset(), message: message.into() })
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, c: char) -> Result<()> {
        if self.eat_op(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        if self.eat_op('+') {
            return self.factor();
        }
        let base = self.base()?;
        if self.eat_op('^') {
            let expo = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(expo)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                let at = self.offset();
                self.pos += 1;
                if name == "t" {
                    return Ok(Expr::Var);
                }
                let arity = match name.as_str() {
                    "exp" | "log" => 1,
                    "min" | "max" | "pow" => 2,
                    _ => return Err(Error::Parse { position: at, message: format!("unknown name '{name}'") }),
                };
                self.expect_op('(')?;
                let a = self.expr()?;
                let b = if arity == 2 {
                    self.expect_op(',')?;
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect_op(')')?;
                Ok(match (name.as_str(), b) {
                    ("exp", None) => Expr::Exp(Box::new(a)),
                    ("log", None) => Expr::Log(Box::new(a)),
                    ("min", Some(b)) => Expr::Min(Box::new(a), Box::new(b)),
                    ("max", Some(b)) => Expr::Max(Box::new(a), Box::new(b)),
                    ("pow", Some(b)) => Expr::Pow(Box::new(a), Box::new(b)),
                    _ => unreachable!(),
                })
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Parses an expression; error positions are byte offsets into `src`.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let toks = Lexer::run(src)?;
    let mut p = Parser { toks, pos: 0, end: src.len() };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}
