//! Lexer and recursive-descent parser for predictor formulas.
//!
//! Grammar (lowest to highest precedence; `^` and `pow` are the same node):
//!
//! ```text
//! expr   := term  (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" unary)?
//! atom   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Functions: `exp(x)`, `log(x)` (natural), `pow(base, exponent)`.
//! Identifiers are `[A-Za-z_][A-Za-z0-9_]*`; numbers are unsigned decimal
//! literals with optional fraction and exponent. All errors carry the byte
//! offset of the offending token.

use super::ast::{self, Expr};
use crate::error::{Error, Result};

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

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut toks = Vec::new();
        loop {
            lx.skip_ws();
            if lx.pos >= lx.src.len() {
                break;
            }
            let start = lx.pos;
            let c = lx.src[lx.pos];
            let tok = match c {
                b'+' => {
                    lx.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    lx.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    lx.pos += 1;
                    Tok::Star
                }
                b'/' => {
                    lx.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    lx.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RParen
                }
                b',' => {
                    lx.pos += 1;
                    Tok::Comma
                }
                b'0'..=b'9' => lx.number(start)?,
                c if c == b'_' || c.is_ascii_alphabetic() => lx.ident(start),
                c => {
                    return Err(Error::Parse {
                        offset: start,
                        message: format!("unexpected character `{}`", c as char),
                    })
                }
            };
            toks.push((tok, start));
        }
        Ok(toks)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn number(&mut self, start: usize) -> Result<Tok> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                // Not an exponent after all (e.g. `2exp(x)` is still an
                // error, but `2e` followed by an ident char rewinds).
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        text.parse::<f64>().map(Tok::Num).map_err(|_| Error::Parse {
            offset: start,
            message: format!("invalid numeric literal `{text}`"),
        })
    }

    fn ident(&mut self, start: usize) -> Tok {
        while self.pos < self.src.len()
            && (self.src[self.pos] == b'_' || self.src[self.pos].is_ascii_alphanumeric())
        {
            self.pos += 1;
        }
        Tok::Ident(String::from_utf8(self.src[start..self.pos].to_vec()).expect("ascii slice"))
    }
}

/// Resolves identifiers against the declared parameter list and the available
/// covariate columns, recording which covariates the expression references.
pub struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
    params: &'a [String],
    available: &'a [String],
    /// Covariates referenced so far, in first-reference order.
    pub used_covariates: Vec<String>,
}

impl<'a> Parser<'a> {
    pub fn parse(src: &str, params: &'a [String], available: &'a [String]) -> Result<(Expr, Vec<String>)> {
        let toks = Lexer::tokenize(src)?;
        let end = src.len();
        let mut p = Parser {
            toks,
            idx: 0,
            end,
            params,
            available,
            used_covariates: Vec::new(),
        };
        let e = p.expr()?;
        if let Some((_, off)) = p.peek() {
            return Err(Error::Parse {
                offset: off,
                message: "unexpected trailing input".into(),
            });
        }
        Ok((e, p.used_covariates))
    }

    fn peek(&self) -> Option<(&Tok, usize)> {
        self.toks.get(self.idx).map(|(t, o)| (t, *o))
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        match self.bump() {
            Some((t, _)) if t == want => Ok(()),
            Some((_, off)) => Err(Error::Parse {
                offset: off,
                message: format!("expected {what}"),
            }),
            None => Err(Error::Parse {
                offset: self.end,
                message: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some((Tok::Plus, _)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some((Tok::Minus, _)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some((Tok::Star, _)) => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some((Tok::Slash, _)) => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some((Tok::Minus, _)) = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some((Tok::Caret, _)) = self.peek() {
            self.bump();
            let expo = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(expo)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some((Tok::Num(v), _)) => Ok(Expr::Const(v)),
            Some((Tok::LParen, _)) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some((Tok::Ident(name), off)) => {
                if let Some((Tok::LParen, _)) = self.peek() {
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while let Some((Tok::Comma, _)) = self.peek() {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    self.function(&name, args, off)
                } else {
                    self.name(&name, off)
                }
            }
            Some((_, off)) => Err(Error::Parse {
                offset: off,
                message: "expected a number, identifier, function call, or `(`".into(),
            }),
            None => Err(Error::Parse {
                offset: self.end,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn function(&mut self, name: &str, mut args: Vec<Expr>, off: usize) -> Result<Expr> {
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    offset: off,
                    message: format!("`{name}` takes {n} argument(s), found {}", args.len()),
                })
            }
        };
        match name {
            "exp" => {
                arity(1)?;
                Ok(ast::exp(args.pop().expect("one arg")))
            }
            "log" => {
                arity(1)?;
                Ok(ast::log(args.pop().expect("one arg")))
            }
            "pow" => {
                arity(2)?;
                let e = args.pop().expect("two args");
                let b = args.pop().expect("two args");
                Ok(Expr::Pow(Box::new(b), Box::new(e)))
            }
            _ => Err(Error::Parse {
                offset: off,
                message: format!("unknown function `{name}` (supported: exp, log, pow)"),
            }),
        }
    }

    fn name(&mut self, name: &str, off: usize) -> Result<Expr> {
        if let Some(i) = self.params.iter().position(|p| p == name) {
            return Ok(Expr::Param(i));
        }
        if self.available.iter().any(|c| c == name) {
            let i = match self.used_covariates.iter().position(|c| c == name) {
                Some(i) => i,
                None => {
                    self.used_covariates.push(name.to_string());
                    self.used_covariates.len() - 1
                }
            };
            return Ok(Expr::Covariate(i));
        }
        Err(Error::UnknownIdentifier {
            name: name.to_string(),
            offset: off,
        })
    }
}
