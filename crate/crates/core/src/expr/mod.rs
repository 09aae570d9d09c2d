//! Hash-consed expression DAG over the plane coordinates `x`, `y` and named
//! free parameters.
//!
//! Every [`Expr`] is an interned handle: building the same structure twice
//! returns the same node, so equality and hashing are by node identity.
//! Constants are exact rationals and power exponents are exact rationals;
//! `sqrt(e)` is stored as `e^(1/2)` and a power with a symbolic exponent is
//! stored as `exp(exponent*log(base))`.
//!
//! The intern table lives for the whole process. Node ids are never reused,
//! which is what lets the derivative and simplification caches key on ids.

mod diff;
mod eval;
mod format;
mod parse;
mod simplify;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, LazyLock, Mutex};

use rug::Rational;

pub use diff::partial;
pub use eval::{
    evaluate, EvalContext, EvalError, FloatEval, Mode, Number, Program, DEFAULT_PRECISION,
};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use simplify::{simplify, simplify_with_notes, SimplifyNote};

/// A coordinate variable of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

/// Node payload. Children are handles, so the derived `Hash`/`Eq` compare
/// children by identity, which is exactly the intern-table key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Kind {
    Const(Rational),
    Var(Var),
    Param(Arc<str>),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    Pow(Expr, Rational),
    Exp(Expr),
    Log(Expr),
    Neg(Expr),
}

#[derive(Debug)]
pub struct Node {
    id: u64,
    kind: Kind,
}

/// Immutable, shareable handle to an interned expression node.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr#{}({})", self.0.id, self)
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);
static INTERNER: LazyLock<Mutex<HashMap<Kind, Expr>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn intern(kind: Kind) -> Expr {
    let mut table = INTERNER.lock().expect("intern table poisoned");
    if let Some(e) = table.get(&kind) {
        return e.clone();
    }
    let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
    let e = Expr(Arc::new(Node {
        id,
        kind: kind.clone(),
    }));
    table.insert(kind, e.clone());
    e
}

impl Expr {
    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn constant(r: Rational) -> Expr {
        intern(Kind::Const(r))
    }

    pub fn int(i: i64) -> Expr {
        Expr::constant(Rational::from(i))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::constant(Rational::from((num, den)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(v: Var) -> Expr {
        intern(Kind::Var(v))
    }

    pub fn x() -> Expr {
        Expr::var(Var::X)
    }

    pub fn y() -> Expr {
        Expr::var(Var::Y)
    }

    pub fn param(name: &str) -> Expr {
        intern(Kind::Param(Arc::from(name)))
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self.kind() {
            Kind::Const(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|r| *r == 0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|r| *r == 1)
    }

    /// Sum with constant folding; zero terms are dropped. Nested sums are
    /// kept as-is (see [`simplify`] for flattening).
    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut acc = Rational::new();
        let mut rest = Vec::with_capacity(terms.len());
        for t in terms {
            match t.kind() {
                Kind::Const(r) => {
                    acc += r;
                }
                _ => rest.push(t),
            }
        }
        if rest.is_empty() {
            return Expr::constant(acc);
        }
        if acc != 0 {
            rest.push(Expr::constant(acc));
        }
        if rest.len() == 1 {
            return rest.pop().unwrap();
        }
        intern(Kind::Add(rest))
    }

    /// Product with constant folding; a zero constant annihilates, unit
    /// factors are dropped and the folded constant goes first.
    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut acc = Rational::from(1);
        let mut rest = Vec::with_capacity(factors.len());
        for f in factors {
            match f.kind() {
                Kind::Const(r) => acc *= r,
                _ => rest.push(f),
            }
        }
        if acc == 0 || rest.is_empty() {
            return Expr::constant(acc);
        }
        if acc != 1 {
            rest.insert(0, Expr::constant(acc));
        }
        if rest.len() == 1 {
            return rest.pop().unwrap();
        }
        intern(Kind::Mul(rest))
    }

    pub fn div(num: Expr, den: Expr) -> Expr {
        if den.is_one() {
            return num;
        }
        if let (Some(a), Some(b)) = (num.as_const(), den.as_const()) {
            if *b != 0 {
                return Expr::constant(Rational::from(a / b));
            }
        }
        if num.is_zero() && den.as_const().is_none() {
            return num;
        }
        intern(Kind::Div(num, den))
    }

    pub fn neg(e: Expr) -> Expr {
        match e.kind() {
            Kind::Const(r) => Expr::constant(Rational::from(-r)),
            Kind::Neg(inner) => inner.clone(),
            _ => intern(Kind::Neg(e)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if a == b {
            return Expr::zero();
        }
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn pow(base: Expr, exponent: Rational) -> Expr {
        if exponent == 0 {
            return Expr::one();
        }
        if exponent == 1 {
            return base;
        }
        if let Some(b) = base.as_const() {
            if let Some(v) = eval::exact_rational_power(b, &exponent) {
                return Expr::constant(v);
            }
        }
        if exponent.denom() == &1 {
            if let Kind::Pow(inner, r) = base.kind() {
                return Expr::pow(inner.clone(), Rational::from(r * &exponent));
            }
        }
        intern(Kind::Pow(base, exponent))
    }

    pub fn powi(base: Expr, n: i64) -> Expr {
        Expr::pow(base, Rational::from(n))
    }

    pub fn sqrt(e: Expr) -> Expr {
        Expr::pow(e, Rational::from((1, 2)))
    }

    pub fn exp(e: Expr) -> Expr {
        if e.is_zero() {
            return Expr::one();
        }
        intern(Kind::Exp(e))
    }

    pub fn log(e: Expr) -> Expr {
        if e.is_one() {
            return Expr::zero();
        }
        intern(Kind::Log(e))
    }

    /// `base^exponent` for an arbitrary exponent expression.
    pub fn pow_expr(base: Expr, exponent: Expr) -> Expr {
        match exponent.as_const() {
            Some(r) => Expr::pow(base, r.clone()),
            None => Expr::exp(Expr::mul(vec![exponent, Expr::log(base)])),
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.kind() {
            Kind::Const(_) | Kind::Var(_) | Kind::Param(_) => Vec::new(),
            Kind::Add(v) | Kind::Mul(v) => v.iter().collect(),
            Kind::Div(a, b) => vec![a, b],
            Kind::Pow(a, _) | Kind::Exp(a) | Kind::Log(a) | Kind::Neg(a) => vec![a],
        }
    }

    /// Unique nodes in children-before-parents order. Iterative, so deep
    /// derivative chains do not overflow the stack.
    pub fn topo_order(&self) -> Vec<Expr> {
        topo_order_many(std::slice::from_ref(self))
    }

    /// Number of distinct nodes reachable from this handle.
    pub fn dag_size(&self) -> usize {
        self.topo_order().len()
    }

    /// Names of the free parameters (everything except `x` and `y`).
    pub fn params(&self) -> BTreeSet<String> {
        self.topo_order()
            .iter()
            .filter_map(|e| match e.kind() {
                Kind::Param(p) => Some(p.to_string()),
                _ => None,
            })
            .collect()
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.topo_order()
            .iter()
            .any(|e| matches!(e.kind(), Kind::Var(w) if *w == v))
    }

    /// True when the expression can be evaluated in exact rational
    /// arithmetic at rational points: no `exp`, `log` or fractional powers.
    pub fn is_rational_function(&self) -> bool {
        self.topo_order().iter().all(|e| match e.kind() {
            Kind::Exp(_) | Kind::Log(_) => false,
            Kind::Pow(_, r) => r.denom() == &1,
            _ => true,
        })
    }

    /// Replaces every occurrence of the leaves in `map` (variables or
    /// parameters) by the given expressions.
    pub fn substitute(&self, map: &[(Expr, Expr)]) -> Expr {
        let lookup: HashMap<u64, Expr> = map.iter().map(|(k, v)| (k.id(), v.clone())).collect();
        let mut done: HashMap<u64, Expr> = HashMap::new();
        for node in self.topo_order() {
            let get = |c: &Expr| done[&c.id()].clone();
            let new = if let Some(r) = lookup.get(&node.id()) {
                r.clone()
            } else {
                match node.kind() {
                    Kind::Const(_) | Kind::Var(_) | Kind::Param(_) => node.clone(),
                    Kind::Add(v) => Expr::add(v.iter().map(get).collect()),
                    Kind::Mul(v) => Expr::mul(v.iter().map(get).collect()),
                    Kind::Div(a, b) => Expr::div(get(a), get(b)),
                    Kind::Pow(a, r) => Expr::pow(get(a), r.clone()),
                    Kind::Exp(a) => Expr::exp(get(a)),
                    Kind::Log(a) => Expr::log(get(a)),
                    Kind::Neg(a) => Expr::neg(get(a)),
                }
            };
            done.insert(node.id(), new);
        }
        done.remove(&self.id()).unwrap()
    }
}

/// Topological order of the union of several DAGs.
pub fn topo_order_many(roots: &[Expr]) -> Vec<Expr> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut stack: Vec<(Expr, bool)> = roots.iter().rev().map(|r| (r.clone(), false)).collect();
    while let Some((e, expanded)) = stack.pop() {
        if expanded {
            out.push(e);
            continue;
        }
        if !seen.insert(e.id()) {
            continue;
        }
        stack.push((e.clone(), true));
        for c in e.children().into_iter().rev() {
            if !seen.contains(&c.id()) {
                stack.push((c.clone(), false));
            }
        }
    }
    out
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<i64> for Expr {
    fn from(i: i64) -> Expr {
        Expr::int(i)
    }
}

pub(crate) fn integer_exponent(r: &Rational) -> Option<i32> {
    if r.denom() != &1 {
        return None;
    }
    r.numer().to_i32()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_consing_returns_same_handle() {
        let a = Expr::x() / Expr::y();
        let b = Expr::x() / Expr::y();
        assert_eq!(a.id(), b.id());
        let c = Expr::sqrt(Expr::x() + Expr::int(1));
        let d = Expr::pow(Expr::x() + Expr::int(1), Rational::from((1, 2)));
        assert_eq!(c, d);
    }

    #[test]
    fn constructors_fold_constants() {
        assert_eq!(Expr::add(vec![Expr::int(2), Expr::int(3)]), Expr::int(5));
        assert_eq!(Expr::mul(vec![Expr::one(), Expr::x()]), Expr::x());
        assert_eq!(Expr::mul(vec![Expr::zero(), Expr::x()]), Expr::zero());
        assert_eq!(Expr::neg(Expr::neg(Expr::y())), Expr::y());
        assert_eq!(Expr::div(Expr::int(1), Expr::int(4)), Expr::ratio(1, 4));
        assert_eq!(
            Expr::pow(Expr::int(4), Rational::from((1, 2))),
            Expr::int(2)
        );
    }

    #[test]
    fn dag_size_counts_shared_nodes_once() {
        let s = Expr::x() + Expr::y();
        let e = Expr::mul(vec![s.clone(), s.clone(), s]);
        // x, y, x+y, product
        assert_eq!(e.dag_size(), 4);
    }

    #[test]
    fn substitution_replaces_variables() {
        let e = Expr::x() * Expr::y();
        let s = e.substitute(&[(Expr::x(), Expr::int(3))]);
        assert_eq!(s, Expr::mul(vec![Expr::int(3), Expr::y()]));
    }

    #[test]
    fn symbolic_exponent_becomes_exp_log() {
        let e = Expr::pow_expr(Expr::x(), Expr::param("n"));
        assert!(matches!(e.kind(), Kind::Exp(_)));
        assert!(!e.is_rational_function());
    }
}
