use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};

use rug::Rational;

use super::{Expr, Kind, Var};

// Node ids are never reused, so entries stay valid for the whole process.
static MEMO: LazyLock<Mutex<HashMap<(u64, Var), Expr>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn cached(e: &Expr, v: Var) -> Option<Expr> {
    MEMO.lock()
        .expect("derivative cache poisoned")
        .get(&(e.id(), v))
        .cloned()
}

/// Symbolic partial derivative. Parameters are constants.
pub fn partial(e: &Expr, v: Var) -> Expr {
    if let Some(d) = cached(e, v) {
        return d;
    }
    let mut local: HashMap<u64, Expr> = HashMap::new();
    for node in e.topo_order() {
        if let Some(d) = cached(&node, v) {
            local.insert(node.id(), d);
            continue;
        }
        let d = derive(&node, v, &local);
        MEMO.lock()
            .expect("derivative cache poisoned")
            .insert((node.id(), v), d.clone());
        local.insert(node.id(), d);
    }
    local.remove(&e.id()).expect("root derivative")
}

fn derive(node: &Expr, v: Var, done: &HashMap<u64, Expr>) -> Expr {
    let d = |c: &Expr| done[&c.id()].clone();
    match node.kind() {
        Kind::Const(_) | Kind::Param(_) => Expr::zero(),
        Kind::Var(w) => {
            if *w == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Kind::Add(terms) => Expr::add(terms.iter().map(d).collect()),
        Kind::Mul(factors) => {
            let mut terms = Vec::new();
            for (i, f) in factors.iter().enumerate() {
                let df = d(f);
                if df.is_zero() {
                    continue;
                }
                let mut prod: Vec<Expr> = factors.clone();
                prod[i] = df;
                terms.push(Expr::mul(prod));
            }
            Expr::add(terms)
        }
        Kind::Div(a, b) => {
            let (da, db) = (d(a), d(b));
            let first = Expr::div(da, b.clone());
            if db.is_zero() {
                return first;
            }
            let second = Expr::div(Expr::mul(vec![a.clone(), db]), Expr::powi(b.clone(), 2));
            Expr::sub(first, second)
        }
        Kind::Pow(a, r) => {
            let da = d(a);
            if da.is_zero() {
                return Expr::zero();
            }
            let lowered = Rational::from(r - 1u32);
            Expr::mul(vec![
                Expr::constant(r.clone()),
                Expr::pow(a.clone(), lowered),
                da,
            ])
        }
        Kind::Exp(a) => {
            let da = d(a);
            if da.is_zero() {
                return Expr::zero();
            }
            Expr::mul(vec![node.clone(), da])
        }
        Kind::Log(a) => Expr::div(d(a), a.clone()),
        Kind::Neg(a) => Expr::neg(d(a)),
    }
}
