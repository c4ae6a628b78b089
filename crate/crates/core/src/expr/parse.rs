//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := "-" term | factor (("*" | "/") factor)*
//! factor  := primary ("^" INT)?
//! primary := INT | IDENT | "exp" "(" expr ")" | "(" expr ")"
//! ```
//!
//! Identifiers `t<k>` and `v<k>` (k ≥ 1) name variable `k - 1` unless a
//! symbol table is supplied.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use super::{ExprError, Expression};
use crate::scalar::Q;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            d if d.is_ascii_digit() => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((start, Tok::Int(text[start..i].parse().unwrap())));
                continue;
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            other => {
                return Err(ExprError::Syntax { pos: start, msg: format!("unexpected character {other:?}") });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    symbols: Option<&'a [&'a str]>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, msg: &str) -> Result<T, ExprError> {
        Err(ExprError::Syntax { pos: self.pos(), msg: msg.to_string() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.syntax(&format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(self.term()?.negate());
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expression::Sum(terms) })
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(self.term()?.negate());
        }
        let mut factors = vec![self.factor()?];
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    factors.push(self.factor()?);
                }
                Tok::Slash => {
                    self.bump();
                    let pos = self.pos();
                    let divisor = self.factor()?;
                    if !divisor.is_constant() {
                        return Err(ExprError::DivisionByNonConstant { pos });
                    }
                    let value = divisor.eval_exact(&[]).map_err(|_| ExprError::DivisionByNonConstant { pos })?;
                    if value.is_zero() {
                        return Err(ExprError::DivisionByZero { pos });
                    }
                    let inv = Q::from_integer(1.into()) / value;
                    match factors.last_mut() {
                        Some(Expression::Const(c)) => *c = &*c * &inv,
                        _ => factors.push(Expression::Const(inv)),
                    }
                }
                _ => break,
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expression::Product(factors) })
    }

    fn factor(&mut self) -> Result<Expression, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        match self.bump() {
            Tok::Int(n) => {
                let n = n.to_u32().ok_or(ExprError::BadExponent { pos })?;
                if *self.peek() == Tok::Caret {
                    return self.syntax("chained exponents need parentheses");
                }
                Ok(Expression::Pow(Box::new(base), n))
            }
            Tok::Minus | Tok::LParen | Tok::Ident(_) => Err(ExprError::BadExponent { pos }),
            _ => Err(ExprError::Syntax { pos, msg: "expected exponent".into() }),
        }
    }

    fn primary(&mut self) -> Result<Expression, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Int(n) => Ok(Expression::Const(Q::from_integer(n))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "exp" => {
                self.expect(Tok::LParen, "'(' after exp")?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Expression::Exp(Box::new(e)))
            }
            Tok::Ident(name) => self.resolve(&name, pos).map(Expression::Var),
            Tok::End => Err(ExprError::Syntax { pos, msg: "unexpected end of input".into() }),
            t => Err(ExprError::Syntax { pos, msg: format!("unexpected token {t:?}") }),
        }
    }

    fn resolve(&self, name: &str, pos: usize) -> Result<usize, ExprError> {
        let unknown = || ExprError::UnknownIdentifier { pos, name: name.to_string() };
        if let Some(symbols) = self.symbols {
            return symbols.iter().position(|s| *s == name).ok_or_else(unknown);
        }
        let digits = name.strip_prefix('t').or_else(|| name.strip_prefix('v')).ok_or_else(unknown)?;
        match digits.parse::<usize>() {
            Ok(k) if k >= 1 && !digits.starts_with('0') => Ok(k - 1),
            _ => Err(unknown()),
        }
    }
}

fn run(text: &str, symbols: Option<&[&str]>) -> Result<Expression, ExprError> {
    let mut p = Parser { toks: lex(text)?, at: 0, symbols };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.syntax("trailing input");
    }
    Ok(e)
}

/// Parses text with variables `t1, t2, ...` (or `v1, v2, ...`).
pub fn parse(text: &str) -> Result<Expression, ExprError> {
    run(text, None)
}

/// Parses text whose variables are exactly the given names, in order.
pub fn parse_with_symbols(text: &str, names: &[&str]) -> Result<Expression, ExprError> {
    run(text, Some(names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qr};

    #[test]
    fn a2_tree() {
        let e = parse("1/2*t1^2*t2 - 1/72*t2^4").unwrap();
        let expect = Expression::Sum(vec![
            Expression::Product(vec![
                Expression::Const(qr(1, 2)),
                Expression::var(0).pow(2),
                Expression::var(1),
            ]),
            Expression::Product(vec![Expression::Const(qr(-1, 72)), Expression::var(1).pow(4)]),
        ]);
        assert_eq!(e, expect);
    }

    #[test]
    fn cp1_tree() {
        let e = parse("1/2*t1^2*t2 + exp(t2)").unwrap();
        let Expression::Sum(terms) = e else { panic!() };
        assert_eq!(terms[1], Expression::var(1).exp());
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(parse("t1^"), Err(ExprError::Syntax { pos: 3, .. })));
        assert!(matches!(parse("1/t1"), Err(ExprError::DivisionByNonConstant { pos: 2 })));
        assert!(matches!(parse("t1^-2"), Err(ExprError::BadExponent { .. })));
        assert!(matches!(parse("t1^t2"), Err(ExprError::BadExponent { .. })));
        assert!(matches!(parse("1/0"), Err(ExprError::DivisionByZero { .. })));
        assert!(matches!(parse("t0"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("(t1"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("t1 t2"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("t1 ? 2"), Err(ExprError::Syntax { pos: 3, .. })));
    }

    #[test]
    fn division_by_constant_expression() {
        assert_eq!(parse("t1/(2*3)").unwrap(), Expression::Product(vec![Expression::var(0), Expression::Const(qr(1, 6))]));
        assert_eq!(parse("3/4").unwrap(), Expression::Const(qr(3, 4)));
        assert_eq!(parse("-3").unwrap(), Expression::Const(q(-3)));
    }

    #[test]
    fn symbol_table() {
        let e = parse_with_symbols("eps*v2", &["v1", "v2", "eps"]).unwrap();
        assert_eq!(e, Expression::Product(vec![Expression::var(2), Expression::var(1)]));
        assert!(parse_with_symbols("t1", &["v1"]).is_err());
        assert_eq!(parse("v4").unwrap(), Expression::var(3));
    }
}
