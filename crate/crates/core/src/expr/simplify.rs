//! Conservative, value-preserving rewrites: flattening, constant folding,
//! collection of like terms and like factors, cancellation of identical
//! factors in quotients, and `exp`/`log` inverse pairs.
//!
//! Cancellation is only valid where the cancelled factor is nonzero; each
//! such step is reported as a [`SimplifyNote`].

use std::collections::HashMap;
use std::fmt;

use rug::Rational;

use super::{Expr, Kind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimplifyNote {
    /// A division by the constant zero was left in place.
    DivisionByZero(Expr),
    /// The rewrite assumed this subexpression is nonzero.
    AssumedNonzero(Expr),
}

impl fmt::Display for SimplifyNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimplifyNote::DivisionByZero(e) => write!(f, "division by zero in {e}"),
            SimplifyNote::AssumedNonzero(e) => write!(f, "valid where {e} != 0"),
        }
    }
}

pub fn simplify(e: &Expr) -> Expr {
    simplify_with_notes(e).0
}

/// Simplifies and reports domain caveats. The result is never larger than
/// the input; if rewriting would grow the DAG the input is returned.
pub fn simplify_with_notes(e: &Expr) -> (Expr, Vec<SimplifyNote>) {
    let mut s = Simplifier::default();
    let mut cur = e.clone();
    for _ in 0..3 {
        let next = s.run(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    if cur.dag_size() > e.dag_size() {
        s.notes
            .retain(|n| matches!(n, SimplifyNote::DivisionByZero(_)));
        cur = e.clone();
    }
    (cur, s.notes)
}

#[derive(Default)]
struct Simplifier {
    memo: HashMap<u64, Expr>,
    notes: Vec<SimplifyNote>,
}

/// Product decomposed as `coeff * prod(base^exp)`, bases in first-seen order.
#[derive(Default)]
struct Factors {
    coeff: Option<Rational>,
    order: Vec<Expr>,
    exps: HashMap<u64, Rational>,
}

impl Factors {
    fn coeff(&self) -> Rational {
        self.coeff.clone().unwrap_or_else(|| Rational::from(1))
    }

    fn scale(&mut self, r: &Rational) {
        let c = self.coeff() * r;
        self.coeff = Some(c);
    }

    fn push(&mut self, base: Expr, exp: Rational) {
        match self.exps.get_mut(&base.id()) {
            Some(e) => *e += exp,
            None => {
                self.exps.insert(base.id(), exp);
                self.order.push(base);
            }
        }
    }

    /// Adds `e^sign` to the product, splitting nested products, quotients,
    /// negations and powers.
    fn absorb(&mut self, e: &Expr, sign: i32) {
        match e.kind() {
            Kind::Const(r) => {
                if sign > 0 {
                    self.scale(r);
                } else {
                    self.scale(&Rational::from(r.recip_ref()));
                }
            }
            Kind::Neg(a) => {
                self.scale(&Rational::from(-1));
                self.absorb(a, sign);
            }
            Kind::Mul(v) => {
                for f in v {
                    self.absorb(f, sign);
                }
            }
            // Left in place by `rewrite`; splitting it would invert zero.
            Kind::Div(_, b) if b.is_zero() => self.push(e.clone(), Rational::from(sign)),
            Kind::Div(a, b) => {
                self.absorb(a, sign);
                self.absorb(b, -sign);
            }
            Kind::Pow(b, r) => self.push(b.clone(), Rational::from(r * sign)),
            _ => self.push(e.clone(), Rational::from(sign)),
        }
    }

    fn exp(&self, e: &Expr) -> Rational {
        self.exps[&e.id()].clone()
    }
}

fn product(coeff: Rational, factors: Vec<Expr>) -> Expr {
    if coeff == -1 && !factors.is_empty() {
        Expr::neg(Expr::mul(factors))
    } else {
        let mut all = Vec::with_capacity(factors.len() + 1);
        all.push(Expr::constant(coeff));
        all.extend(factors);
        Expr::mul(all)
    }
}

/// Splits a term into rational coefficient and symbolic part.
fn split_term(t: &Expr) -> (Rational, Expr) {
    match t.kind() {
        Kind::Const(r) => (r.clone(), Expr::one()),
        Kind::Neg(a) => {
            let (c, b) = split_term(a);
            (-c, b)
        }
        Kind::Mul(fs) => match fs[0].as_const() {
            Some(c) => (c.clone(), Expr::mul(fs[1..].to_vec())),
            None => (Rational::from(1), t.clone()),
        },
        _ => (Rational::from(1), t.clone()),
    }
}

/// Grouping key for like terms: products compare as factor multisets.
fn term_key(base: &Expr) -> Vec<u64> {
    match base.kind() {
        Kind::Mul(fs) => {
            let mut ids: Vec<u64> = fs.iter().map(|f| f.id()).collect();
            ids.sort_unstable();
            ids
        }
        _ => vec![base.id()],
    }
}

fn scaled(c: Rational, base: Expr) -> Expr {
    if base.is_one() {
        return Expr::constant(c);
    }
    if c == 1 {
        return base;
    }
    if c == -1 {
        return Expr::neg(base);
    }
    match base.kind() {
        Kind::Mul(fs) => {
            let mut all = vec![Expr::constant(c)];
            all.extend(fs.iter().cloned());
            Expr::mul(all)
        }
        _ => Expr::mul(vec![Expr::constant(c), base]),
    }
}

impl Simplifier {
    fn run(&mut self, e: &Expr) -> Expr {
        for node in e.topo_order() {
            if self.memo.contains_key(&node.id()) {
                continue;
            }
            let s = self.rewrite(&node);
            self.memo.insert(node.id(), s);
        }
        self.memo[&e.id()].clone()
    }

    fn get(&self, e: &Expr) -> Expr {
        self.memo[&e.id()].clone()
    }

    fn note(&mut self, n: SimplifyNote) {
        if !self.notes.contains(&n) {
            self.notes.push(n);
        }
    }

    fn rewrite(&mut self, node: &Expr) -> Expr {
        match node.kind() {
            Kind::Const(_) | Kind::Var(_) | Kind::Param(_) => node.clone(),
            Kind::Add(v) => {
                let children: Vec<Expr> = v.iter().map(|c| self.get(c)).collect();
                self.sum(children)
            }
            Kind::Mul(v) => {
                let mut fs = Factors::default();
                for c in v {
                    fs.absorb(&self.get(c), 1);
                }
                self.rebuild_product(fs)
            }
            Kind::Div(a, b) => {
                let (a, b) = (self.get(a), self.get(b));
                if b.is_zero() {
                    self.note(SimplifyNote::DivisionByZero(node.clone()));
                    return Expr::div(a, b);
                }
                self.quotient(a, b)
            }
            Kind::Pow(a, r) => Expr::pow(self.get(a), r.clone()),
            Kind::Exp(a) => {
                let a = self.get(a);
                match a.kind() {
                    Kind::Log(b) => b.clone(),
                    Kind::Mul(fs) if fs.len() == 2 => match (fs[0].as_const(), fs[1].kind()) {
                        (Some(c), Kind::Log(b)) => Expr::pow(b.clone(), c.clone()),
                        _ => Expr::exp(a),
                    },
                    _ => Expr::exp(a),
                }
            }
            Kind::Log(a) => {
                let a = self.get(a);
                match a.kind() {
                    Kind::Exp(b) => b.clone(),
                    _ => Expr::log(a),
                }
            }
            Kind::Neg(a) => {
                let a = self.get(a);
                let (c, base) = split_term(&a);
                scaled(-c, base)
            }
        }
    }

    fn sum(&mut self, children: Vec<Expr>) -> Expr {
        let mut flat = Vec::new();
        let mut stack: Vec<(Expr, bool)> = children.into_iter().rev().map(|c| (c, false)).collect();
        while let Some((t, negated)) = stack.pop() {
            match t.kind() {
                Kind::Add(v) => {
                    stack.extend(v.iter().rev().map(|c| (c.clone(), negated)));
                }
                Kind::Neg(inner) if matches!(inner.kind(), Kind::Add(_)) => {
                    stack.push((inner.clone(), !negated));
                }
                _ => flat.push((t, negated)),
            }
        }
        let mut constant = Rational::new();
        let mut order: Vec<(Vec<u64>, Expr)> = Vec::new();
        let mut coeffs: HashMap<Vec<u64>, Rational> = HashMap::new();
        for (t, negated) in flat {
            let (mut c, base) = split_term(&t);
            if negated {
                c = -c;
            }
            if base.is_one() {
                constant += c;
                continue;
            }
            let key = term_key(&base);
            match coeffs.get_mut(&key) {
                Some(acc) => *acc += c,
                None => {
                    coeffs.insert(key.clone(), c);
                    order.push((key, base));
                }
            }
        }
        let mut terms = Vec::with_capacity(order.len() + 1);
        for (key, base) in order {
            let c = coeffs.remove(&key).unwrap();
            if c != 0 {
                terms.push(scaled(c, base));
            }
        }
        terms.push(Expr::constant(constant));
        Expr::add(terms)
    }

    fn powers(&mut self, fs: &Factors) -> Vec<Expr> {
        let mut out = Vec::with_capacity(fs.order.len());
        for b in &fs.order {
            let r = fs.exp(b);
            if r == 0 {
                self.note(SimplifyNote::AssumedNonzero(b.clone()));
                continue;
            }
            out.push(Expr::pow(b.clone(), r));
        }
        out
    }

    fn rebuild_product(&mut self, fs: Factors) -> Expr {
        let coeff = fs.coeff();
        if coeff == 0 {
            return Expr::zero();
        }
        let factors = self.powers(&fs);
        product(coeff, factors)
    }

    fn quotient(&mut self, a: Expr, b: Expr) -> Expr {
        let mut num = Factors::default();
        num.absorb(&a, 1);
        let mut den = Factors::default();
        den.absorb(&b, 1);
        let coeff = num.coeff() / den.coeff();
        if coeff == 0 {
            return Expr::zero();
        }
        let mut top = Factors::default();
        let mut bottom = Factors::default();
        for base in &num.order {
            let mut r = num.exp(base);
            if let Some(s) = den.exps.get(&base.id()) {
                self.note(SimplifyNote::AssumedNonzero(base.clone()));
                r -= s;
            }
            if r > 0 || !den.exps.contains_key(&base.id()) {
                top.push(base.clone(), r);
            } else if r < 0 {
                bottom.push(base.clone(), -r);
            }
        }
        for base in &den.order {
            if !num.exps.contains_key(&base.id()) {
                bottom.push(base.clone(), den.exp(base));
            }
        }
        let top_factors = self.powers(&top);
        let bottom_factors = self.powers(&bottom);
        Expr::div(product(coeff, top_factors), Expr::mul(bottom_factors))
    }
}
