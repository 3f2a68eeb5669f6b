//! Recursive-descent parser for the polynomial grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' digits)?
//! atom   := digits | 'i' | ident | '(' expr ')'
//! ```
//!
//! Division is only allowed by nonzero constants. The canonical text emitted by
//! `Display` is a sentence of this grammar.

use num_bigint::BigInt;

use super::context::Ctx;
use super::poly::Polynomial;
use super::scalar::{Rational, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        while let Some(t) = lx.next_tok()? {
            out.push(t);
        }
        Ok(out)
    }

    fn next_tok(&mut self) -> Result<Option<(usize, Tok)>> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = bytes[self.pos];
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' => {
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let n: BigInt = self.src[start..self.pos].parse().expect("digits");
                return Ok(Some((start, Tok::Num(n))));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                return Ok(Some((start, Tok::Ident(self.src[start..self.pos].to_string()))));
            }
            _ => {
                return Err(Error::Parse {
                    column: start + 1,
                    message: format!(
                        "unexpected character `{}`",
                        self.src[start..].chars().next().unwrap()
                    ),
                })
            }
        };
        self.pos += 1;
        Ok(Some((start, tok)))
    }
}

struct Parser<'c, S: Scalar> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    ctx: &'c Ctx,
    _marker: std::marker::PhantomData<S>,
}

impl<'c, S: Scalar> Parser<'c, S> {
    fn column(&self) -> usize {
        self.toks.get(self.at).map_or(self.end + 1, |(p, _)| p + 1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { column: self.column(), message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn expr(&mut self) -> Result<Polynomial<S>> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc = acc + self.term()?;
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial<S>> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    acc = acc * self.unary()?;
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let col = self.column();
                    let d = self.unary()?;
                    if !d.is_constant() {
                        return Err(Error::Parse {
                            column: col,
                            message: "division by a non-constant expression".into(),
                        });
                    }
                    let inv = d.constant_term().inv().ok_or(Error::Parse {
                        column: col,
                        message: "division by zero".into(),
                    })?;
                    acc = acc.scale(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial<S>> {
        if let Some(Tok::Minus) = self.peek() {
            self.bump();
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Polynomial<S>> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            match self.bump() {
                Some(Tok::Num(n)) => {
                    let e: u32 = n.try_into().map_err(|_| Error::Parse {
                        column: self.toks[self.at - 1].0 + 1,
                        message: "exponent too large".into(),
                    })?;
                    return Ok(base.pow(e));
                }
                _ => {
                    self.at -= 1;
                    return self.err("expected a nonnegative integer exponent");
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial<S>> {
        let col = self.column();
        match self.bump() {
            Some(Tok::Num(n)) => {
                Ok(Polynomial::constant(self.ctx, S::from_rational(Rational::from_integer(n))))
            }
            Some(Tok::Ident(name)) => {
                if name == "i" {
                    return match S::imaginary_unit() {
                        Some(i) => Ok(Polynomial::constant(self.ctx, i)),
                        None => Err(Error::Parse {
                            column: col,
                            message: "imaginary unit in a real coefficient field".into(),
                        }),
                    };
                }
                match self.ctx.index_of(&name) {
                    Some(idx) => Ok(Polynomial::var(self.ctx, idx)),
                    None => Err(Error::Parse {
                        column: col,
                        message: format!("unknown variable `{name}`"),
                    }),
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => {
                        self.at -= 1;
                        self.err("expected `)`")
                    }
                }
            }
            Some(_) => {
                self.at -= 1;
                self.err("expected a number, variable or `(`")
            }
            None => self.err("unexpected end of input"),
        }
    }
}

/// Parse a polynomial in `ctx`.
pub fn parse_poly<S: Scalar>(ctx: &Ctx, src: &str) -> Result<Polynomial<S>> {
    let toks = Lexer::tokens(src)?;
    if toks.is_empty() {
        return Err(Error::Parse { column: 1, message: "empty expression".into() });
    }
    let mut p = Parser { toks, at: 0, end: src.len(), ctx, _marker: std::marker::PhantomData };
    let out = p.expr()?;
    if p.at < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::context::VarContext;
    use crate::coeff::scalar::GaussianRational;

    type P = Polynomial<GaussianRational>;

    fn ctx() -> Ctx {
        VarContext::base(&["x", "y"], &["t"]).unwrap()
    }

    #[test]
    fn parses_and_prints_canonically() {
        let c = ctx();
        let p: P = parse_poly(&c, "(x + i*y)*(x - i*y)").unwrap();
        assert_eq!(p.to_string(), "x^2 + y^2");
        let q: P = parse_poly(&c, "1/2*x^2*y - 3/4*i + t").unwrap();
        assert_eq!(q.to_string(), "1/2*x^2*y + t - 3/4*i");
        let r: P = parse_poly(&c, "(1/2-3/4*i)*x").unwrap();
        assert_eq!(r.to_string(), "(1/2-3/4*i)*x");
        assert_eq!(parse_poly::<GaussianRational>(&c, &r.to_string()).unwrap(), r);
        let z: P = parse_poly(&c, "x - x").unwrap();
        assert_eq!(z.to_string(), "0");
        let neg: P = parse_poly(&c, "-x^2").unwrap();
        assert_eq!(neg.to_string(), "-x^2");
    }

    #[test]
    fn reports_error_positions() {
        let c = ctx();
        let e = parse_poly::<GaussianRational>(&c, "x + z").unwrap_err();
        assert_eq!(e, Error::Parse { column: 5, message: "unknown variable `z`".into() });
        let e = parse_poly::<GaussianRational>(&c, "x / y").unwrap_err();
        assert!(matches!(e, Error::Parse { column: 5, .. }));
        let e = parse_poly::<GaussianRational>(&c, "(x + 1").unwrap_err();
        assert!(matches!(e, Error::Parse { column: 7, .. }));
        let e = parse_poly::<GaussianRational>(&c, "x $ 1").unwrap_err();
        assert!(matches!(e, Error::Parse { column: 3, .. }));
        let e = parse_poly::<GaussianRational>(&c, "x^y").unwrap_err();
        assert!(matches!(e, Error::Parse { column: 3, .. }));
        assert!(parse_poly::<crate::coeff::scalar::Rational>(&c, "i*x").is_err());
    }
}
