//! Deterministic printer whose output re-parses to the same handle.

use std::fmt::{self, Write};

use rug::Rational;

use super::{Expr, Kind};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn is_neg_const(r: &Rational) -> bool {
    *r < 0
}

fn precedence(e: &Expr) -> u8 {
    match e.kind() {
        Kind::Const(r) if is_neg_const(r) => PREC_UNARY,
        Kind::Const(_) | Kind::Var(_) | Kind::Param(_) | Kind::Exp(_) | Kind::Log(_) => PREC_ATOM,
        Kind::Pow(_, r) if *r == (1, 2) => PREC_ATOM,
        Kind::Pow(..) => PREC_POW,
        Kind::Neg(_) => PREC_UNARY,
        Kind::Mul(_) | Kind::Div(..) => PREC_MUL,
        Kind::Add(_) => PREC_ADD,
    }
}

fn wrapped(e: &Expr, min: u8) -> String {
    let s = render(e);
    if precedence(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn render(e: &Expr) -> String {
    let mut out = String::new();
    match e.kind() {
        Kind::Const(r) => out.push_str(&r.to_string()),
        Kind::Var(v) => out.push_str(v.name()),
        Kind::Param(p) => out.push_str(p),
        Kind::Add(terms) => {
            for (i, t) in terms.iter().enumerate() {
                if i == 0 {
                    out.push_str(&wrapped_add_term(t));
                    continue;
                }
                match t.kind() {
                    Kind::Neg(inner) => {
                        out.push_str(" - ");
                        out.push_str(&wrapped(inner, PREC_MUL));
                    }
                    Kind::Const(r) if is_neg_const(r) => {
                        let _ = write!(out, " - {}", Rational::from(-r));
                    }
                    _ => {
                        out.push_str(" + ");
                        out.push_str(&wrapped_add_term(t));
                    }
                }
            }
        }
        Kind::Mul(factors) => {
            for (i, f) in factors.iter().enumerate() {
                if i > 0 {
                    out.push('*');
                }
                let s = match f.kind() {
                    Kind::Div(..) if i == 0 => render(f),
                    Kind::Mul(_) | Kind::Div(..) | Kind::Add(_) => format!("({})", render(f)),
                    _ => wrapped(f, PREC_UNARY),
                };
                out.push_str(&s);
            }
        }
        Kind::Div(a, b) => {
            let num = match a.kind() {
                Kind::Add(_) => format!("({})", render(a)),
                _ => wrapped(a, PREC_UNARY.min(PREC_MUL)),
            };
            let mut den = match b.kind() {
                Kind::Mul(_) | Kind::Div(..) | Kind::Add(_) => format!("({})", render(b)),
                _ => wrapped(b, PREC_UNARY),
            };
            // `2/3` would lex as one rational literal.
            let ends_digit = num.chars().last().is_some_and(|c| c.is_ascii_digit());
            let starts_digit = den.chars().next().is_some_and(|c| c.is_ascii_digit());
            if ends_digit && starts_digit {
                den = format!("({den})");
            }
            let _ = write!(out, "{num}/{den}");
        }
        Kind::Pow(b, r) => {
            if *r == (1, 2) {
                let _ = write!(out, "sqrt({})", render(b));
            } else {
                let base = match b.kind() {
                    Kind::Const(c) if !is_neg_const(c) => render(b),
                    _ => wrapped(b, PREC_ATOM),
                };
                let exp = if r.denom() == &1 {
                    r.to_string()
                } else {
                    format!("({r})")
                };
                let _ = write!(out, "{base}^{exp}");
            }
        }
        Kind::Exp(a) => {
            let _ = write!(out, "exp({})", render(a));
        }
        Kind::Log(a) => {
            let _ = write!(out, "log({})", render(a));
        }
        Kind::Neg(a) => {
            let _ = write!(out, "-{}", wrapped(a, PREC_POW));
        }
    }
    out
}

fn wrapped_add_term(t: &Expr) -> String {
    match t.kind() {
        Kind::Add(_) => format!("({})", render(t)),
        _ => render(t),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}
