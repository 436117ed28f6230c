//! Pratt parser for the plain expression syntax.
//!
//! Multiplication is always explicit, `^` is right-associative and binds
//! tighter than unary minus (`-x^2` is `-(x^2)`), and `x^-2` is accepted.
//! `i` is the imaginary unit. `sin cos tan exp log sqrt` are built in; any
//! other identifier followed by `(` is an uninterpreted function, and primes
//! after the name denote derivatives: `h0''(x)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    Prime,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (p, t) = lx.next()?;
            let done = t == Tok::Eof;
            out.push((p, t));
            if done {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(usize, Tok)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((start, Tok::Eof));
        };
        if c.is_ascii_digit() || (c == b'.' && bytes.get(self.pos + 1).is_some_and(u8::is_ascii_digit)) {
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let int_part = &self.src[start..self.pos];
            let mut value = if int_part.is_empty() {
                BigRational::zero()
            } else {
                BigRational::from_integer(int_part.parse::<BigInt>().unwrap())
            };
            if self.pos < bytes.len() && bytes[self.pos] == b'.' {
                self.pos += 1;
                let frac_start = self.pos;
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let digits = &self.src[frac_start..self.pos];
                if !digits.is_empty() {
                    let num: BigInt = digits.parse().unwrap();
                    let den = num_traits::pow(BigInt::from(10), digits.len());
                    value += BigRational::new(num, den);
                }
            }
            return Ok((start, Tok::Num(value)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            return Ok((start, Tok::Ident(self.src[start..self.pos].to_string())));
        }
        self.pos += 1;
        let t = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'\'' => Tok::Prime,
            _ => {
                return Err(Error::Syntax {
                    position: start,
                    expected: "a number, identifier, operator or parenthesis".into(),
                })
            }
        };
        Ok((start, t))
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    k: usize,
}

const UNARY_BP: u8 = 3;

fn infix_bp(op: char) -> Option<(u8, u8)> {
    match op {
        '+' | '-' => Some((1, 2)),
        '*' | '/' => Some((2, 3)),
        '^' => Some((4, 4)),
        _ => None,
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.k].1
    }

    fn pos(&self) -> usize {
        self.toks[self.k].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.k].1.clone();
        if self.k + 1 < self.toks.len() {
            self.k += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Syntax { position: self.pos(), expected: expected.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.fail(what)
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match self.peek() {
                Tok::Op(c) => *c,
                Tok::Eof | Tok::RParen | Tok::Comma => break,
                _ => return self.fail("an operator (multiplication must be written with `*`)"),
            };
            let (lbp, rbp) = infix_bp(op).unwrap();
            if lbp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(rbp)?;
            lhs = match op {
                '+' => lhs + rhs,
                '-' => lhs - rhs,
                '*' => lhs * rhs,
                '/' => {
                    if rhs.is_zero() {
                        return Err(Error::DivisionByZero);
                    }
                    lhs / rhs
                }
                '^' => lhs.pow(&rhs),
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr> {
        match self.bump() {
            Tok::Num(r) => Ok(Expr::rational(r)),
            Tok::Op('-') => Ok(-self.expr(UNARY_BP)?),
            Tok::Op('+') => self.expr(UNARY_BP),
            Tok::LParen => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name),
            _ => {
                self.k = self.k.saturating_sub(1);
                self.fail("a number, identifier, `(` or unary sign")
            }
        }
    }

    fn ident(&mut self, name: String) -> Result<Expr> {
        let mut primes = 0u32;
        while *self.peek() == Tok::Prime {
            self.bump();
            primes += 1;
        }
        if *self.peek() != Tok::LParen {
            if primes > 0 {
                return self.fail("`(` after a derivative mark");
            }
            return Ok(if name == "i" { Expr::i() } else { Expr::symbol(&name) });
        }
        self.bump();
        let arg = self.expr(0)?;
        self.expect(Tok::RParen, "`)` closing the argument list")?;
        if primes == 0 {
            if name == "sqrt" {
                return Ok(arg.sqrt());
            }
            if let Some(f) = Func::from_name(&name) {
                return Ok(Expr::apply(f, arg));
            }
        } else if name == "sqrt" || Func::from_name(&name).is_some() {
            return self.fail("derivative marks only on user functions");
        }
        if name == "i" {
            return self.fail("an operator after `i`");
        }
        Ok(Expr::opaque(&name, primes, arg))
    }
}

/// Parses one expression in the plain syntax.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, k: 0 };
    if *p.peek() == Tok::Eof {
        return p.fail("an expression");
    }
    let e = p.expr(0)?;
    if *p.peek() != Tok::Eof {
        return p.fail("end of input");
    }
    Ok(e)
}

/// Parses `a -> 1, b -> 2/3` style binding lists.
pub fn parse_bindings(text: &str) -> Result<Vec<(String, Expr)>> {
    let mut out = Vec::new();
    let trimmed = text.trim().trim_start_matches('{').trim_end_matches('}');
    if trimmed.trim().is_empty() {
        return Ok(out);
    }
    let mut offset = text.find(trimmed).unwrap_or(0);
    for item in trimmed.split(',') {
        let Some((lhs, rhs)) = item.split_once("->") else {
            return Err(Error::Syntax { position: offset, expected: "`name -> value`".into() });
        };
        let name = lhs.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Syntax { position: offset, expected: "a symbol name".into() });
        }
        let value = parse_expr(rhs).map_err(|e| match e {
            Error::Syntax { position, expected } => Error::Syntax {
                position: position + offset + lhs.len() + 2,
                expected,
            },
            other => other,
        })?;
        out.push((name.to_string(), value));
        offset += item.len() + 1;
    }
    Ok(out)
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        parse_expr(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn precedence_rules() {
        assert_eq!(p("-x^2"), -(Expr::symbol("x").powi(2)));
        assert_eq!(p("2^3^2"), Expr::int(512));
        assert_eq!(p("x^-2"), Expr::symbol("x").powi(-2));
        assert_eq!(p("1/2*x"), Expr::symbol("x") / Expr::int(2));
    }

    #[test]
    fn functions_and_primes() {
        let e = p("h0''(x) + sqrt(x) + i^2");
        assert_eq!(e, Expr::opaque("h0", 2, Expr::symbol("x")) + Expr::symbol("x").sqrt() - Expr::one());
        assert_eq!(p("sin(-x)"), -Expr::symbol("x").sin());
    }

    #[test]
    fn juxtaposition_rejected() {
        match parse_expr("2 x") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_expr("(x").is_err());
        assert!(parse_expr("").is_err());
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(p("0.25"), Expr::frac(1, 4));
    }

    #[test]
    fn binding_lists() {
        let b = parse_bindings("x -> 55, k -> 4/100, om -> 26041/10^7").unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[1].1, Expr::frac(1, 25));
        assert_eq!(b[2].1, Expr::frac(26041, 10_000_000));
    }
}
