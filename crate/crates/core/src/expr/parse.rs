//! Recursive-descent parser for the web-function input syntax.
//!
//! ```text
//! expr   := term (('+'|'-') term)* ;
//! term   := unary (('*'|'/') unary)* ;
//! unary  := '-' unary | power ;
//! power  := atom ('^' unary)? ;
//! atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')' ;
//! ```
//!
//! A literal `p/q` written without whitespace is a single rational NUMBER,
//! so `x^1/2` is `x^(1/2)` and `x/2` is a division. Decimals are converted
//! to exact rationals. There is no implicit multiplication: `xy` is a
//! parameter name.

use std::fmt;

use rug::{Integer, Rational};

use super::Expr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    UnknownFunction(String),
    MissingArgument(String),
    InvalidIdentifier(String),
    ZeroDenominator,
}

/// Syntax error with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::UnexpectedChar(c) => {
                write!(f, "unexpected character '{c}' at offset {}", self.offset)
            }
            ParseErrorKind::UnexpectedToken(t) => {
                write!(
                    f,
                    "syntax error at offset {}: unexpected '{t}'",
                    self.offset
                )
            }
            ParseErrorKind::UnexpectedEnd => {
                write!(
                    f,
                    "syntax error at offset {}: unexpected end of input",
                    self.offset
                )
            }
            ParseErrorKind::UnknownFunction(name) => {
                write!(f, "unknown function '{name}' at offset {}", self.offset)
            }
            ParseErrorKind::MissingArgument(name) => {
                write!(
                    f,
                    "function '{name}' needs a parenthesized argument (offset {})",
                    self.offset
                )
            }
            ParseErrorKind::InvalidIdentifier(name) => write!(
                f,
                "invalid identifier '{name}' at offset {} (parameters match [a-z][a-z0-9_]*)",
                self.offset
            ),
            ParseErrorKind::ZeroDenominator => {
                write!(f, "zero denominator in literal at offset {}", self.offset)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
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

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Num(r) => r.to_string(),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::End => "<end>".into(),
        }
    }
}

fn digits_at(bytes: &[u8], start: usize) -> usize {
    let mut i = start;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    i
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let int_end = digits_at(bytes, i);
                let (value, end) = if int_end < bytes.len() && bytes[int_end] == b'.' {
                    let frac_end = digits_at(bytes, int_end + 1);
                    if frac_end == int_end + 1 && int_end == i {
                        return Err(ParseError {
                            kind: ParseErrorKind::UnexpectedChar('.'),
                            offset: i,
                        });
                    }
                    let whole = &src[i..int_end];
                    let frac = &src[int_end + 1..frac_end];
                    let digits = format!("{whole}{frac}");
                    let num =
                        Integer::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10)
                            .expect("digits");
                    let den = Integer::from(Integer::u_pow_u(10, frac.len() as u32));
                    (Rational::from((num, den)), frac_end)
                } else if int_end + 1 < bytes.len()
                    && bytes[int_end] == b'/'
                    && bytes[int_end + 1].is_ascii_digit()
                {
                    let den_end = digits_at(bytes, int_end + 1);
                    let num = Integer::from_str_radix(&src[i..int_end], 10).expect("digits");
                    let den =
                        Integer::from_str_radix(&src[int_end + 1..den_end], 10).expect("digits");
                    if den == 0 {
                        return Err(ParseError {
                            kind: ParseErrorKind::ZeroDenominator,
                            offset: i,
                        });
                    }
                    (Rational::from((num, den)), den_end)
                } else {
                    let num = Integer::from_str_radix(&src[i..int_end], 10).expect("digits");
                    (Rational::from(num), int_end)
                };
                out.push((Tok::Num(value), start));
                i = end;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push((Tok::Ident(src[i..j].to_string()), start));
                i = j;
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar(ch),
                    offset: i,
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        let kind = match self.peek() {
            Tok::End => ParseErrorKind::UnexpectedEnd,
            t => ParseErrorKind::UnexpectedToken(t.text()),
        };
        ParseError {
            kind,
            offset: self.offset(),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(Expr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::add(terms)
        })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        // Factors of a product started in this chain; a parenthesized
        // product on the left stays nested.
        let mut chain: Option<Vec<Expr>> = None;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    match chain.as_mut() {
                        Some(v) => v.push(rhs),
                        None => chain = Some(vec![acc.clone(), rhs]),
                    }
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    if let Some(v) = chain.take() {
                        acc = Expr::mul(v);
                    }
                    acc = Expr::div(acc, rhs);
                }
                _ => break,
            }
        }
        if let Some(v) = chain {
            acc = Expr::mul(v);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::pow_expr(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(r) => {
                self.bump();
                Ok(Expr::constant(r))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                let call = *self.peek() == Tok::LParen;
                let func: Option<fn(Expr) -> Expr> = match name.as_str() {
                    "sqrt" => Some(Expr::sqrt),
                    "exp" => Some(Expr::exp),
                    "log" => Some(Expr::log),
                    _ => None,
                };
                match (func, call) {
                    (Some(f), true) => {
                        self.bump();
                        let arg = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(f(arg))
                    }
                    (Some(_), false) => Err(ParseError {
                        kind: ParseErrorKind::MissingArgument(name),
                        offset,
                    }),
                    (None, true) => Err(ParseError {
                        kind: ParseErrorKind::UnknownFunction(name),
                        offset,
                    }),
                    (None, false) => match name.as_str() {
                        "x" => Ok(Expr::x()),
                        "y" => Ok(Expr::y()),
                        _ if is_param_name(&name) => Ok(Expr::param(&name)),
                        _ => Err(ParseError {
                            kind: ParseErrorKind::InvalidIdentifier(name),
                            offset,
                        }),
                    },
                }
            }
            _ => Err(self.unexpected()),
        }
    }
}

fn is_param_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Parses `text` into an interned expression.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    if toks.len() == 1 {
        return Err(ParseError {
            kind: ParseErrorKind::Empty,
            offset: 0,
        });
    }
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected());
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Kind;

    #[test]
    fn division_is_structural() {
        let e = parse("x/y").unwrap();
        assert_eq!(e, Expr::div(Expr::x(), Expr::y()));
    }

    #[test]
    fn sqrt_becomes_half_power() {
        let e = parse("x + sqrt(x^2 - y)").unwrap();
        let inner = Expr::sub(Expr::powi(Expr::x(), 2), Expr::y());
        assert_eq!(e, Expr::add(vec![Expr::x(), Expr::sqrt(inner)]));
    }

    #[test]
    fn doubled_operator_reports_offset() {
        let err = parse("x + + y").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(matches!(err.kind, ParseErrorKind::UnexpectedToken(_)));
    }

    #[test]
    fn empty_and_unknown_function() {
        assert_eq!(parse("   ").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(
            parse("sin(x)").unwrap_err().kind,
            ParseErrorKind::UnknownFunction("sin".into())
        );
        assert_eq!(
            parse("sqrt x").unwrap_err().kind,
            ParseErrorKind::MissingArgument("sqrt".into())
        );
        assert!(matches!(
            parse("x +").unwrap_err().kind,
            ParseErrorKind::UnexpectedEnd
        ));
        assert!(matches!(
            parse("(x").unwrap_err().kind,
            ParseErrorKind::UnexpectedEnd
        ));
        assert!(matches!(
            parse("X").unwrap_err().kind,
            ParseErrorKind::InvalidIdentifier(_)
        ));
        assert!(matches!(
            parse("x $ y").unwrap_err().kind,
            ParseErrorKind::UnexpectedChar('$')
        ));
    }

    #[test]
    fn no_implicit_multiplication() {
        let e = parse("xy").unwrap();
        assert!(matches!(e.kind(), Kind::Param(p) if &**p == "xy"));
        assert!(parse("2x").is_err());
    }

    #[test]
    fn numbers_are_exact() {
        assert_eq!(parse("0.25").unwrap(), Expr::ratio(1, 4));
        assert_eq!(parse("3/4").unwrap(), Expr::ratio(3, 4));
        assert_eq!(parse("x^1/2").unwrap(), Expr::sqrt(Expr::x()));
        assert_eq!(parse("x^2^3").unwrap(), Expr::powi(Expr::x(), 8));
        assert_eq!(
            parse("1/0").unwrap_err().kind,
            ParseErrorKind::ZeroDenominator
        );
    }

    #[test]
    fn unary_minus_binds_tighter_than_product() {
        let e = parse("-x*y").unwrap();
        assert_eq!(e, Expr::mul(vec![Expr::neg(Expr::x()), Expr::y()]));
        let e = parse("-x^2").unwrap();
        assert_eq!(e, Expr::neg(Expr::powi(Expr::x(), 2)));
    }

    #[test]
    fn symbolic_exponent() {
        let e = parse("x^n + y^n").unwrap();
        assert_eq!(
            e.params().into_iter().collect::<Vec<_>>(),
            vec!["n".to_string()]
        );
    }

    #[test]
    fn parse_is_idempotent_on_handles() {
        let a = parse("(x - x*y)/(y - x*y)").unwrap();
        let b = parse("(x - x*y)/(y - x*y)").unwrap();
        assert_eq!(a.id(), b.id());
    }
}
