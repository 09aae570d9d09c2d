//! Reproducible random sample points and the web admissibility guard.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::{Float, Rational};

use crate::calculus::{basic_invariant, Domain, WebSpec};
use crate::expr::{partial, EvalError, Expr, FloatEval, Program, Var};

/// Largest denominator of a drawn coordinate.
pub const MAX_DENOMINATOR: i64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Rational,
    pub y: Rational,
    pub params: BTreeMap<String, Rational>,
}

impl Point {
    pub fn new(x: Rational, y: Rational) -> Point {
        Point {
            x,
            y,
            params: BTreeMap::new(),
        }
    }
}

pub struct Sampler {
    rng: ChaCha8Rng,
    domain: Domain,
}

impl Sampler {
    /// Different `stream`s give independent sequences from the same seed.
    pub fn new(domain: &Domain, seed: u64, stream: u64) -> Sampler {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Sampler {
            rng,
            domain: domain.clone(),
        }
    }

    /// Uniform rational in [lo, hi] with denominator at most 10⁴.
    pub fn rational_in(&mut self, lo: &Rational, hi: &Rational) -> Rational {
        loop {
            let den = self.rng.gen_range(1..=MAX_DENOMINATOR);
            let lo_n = Rational::from(lo * den).ceil().numer().to_i64();
            let hi_n = Rational::from(hi * den).floor().numer().to_i64();
            let (Some(lo_n), Some(hi_n)) = (lo_n, hi_n) else {
                continue;
            };
            if lo_n > hi_n {
                continue;
            }
            let num = self.rng.gen_range(lo_n..=hi_n);
            return Rational::from((num, den));
        }
    }

    pub fn params(&mut self, names: &[String]) -> BTreeMap<String, Rational> {
        names
            .iter()
            .map(|n| {
                let (lo, hi) = self.domain.param_range(n);
                (n.clone(), self.rational_in(&lo, &hi))
            })
            .collect()
    }

    pub fn point(&mut self, params: &BTreeMap<String, Rational>) -> Point {
        let (xl, xh) = self.domain.x.clone();
        let (yl, yh) = self.domain.y.clone();
        let x = self.rational_in(&xl, &xh);
        let y = self.rational_in(&yl, &yh);
        Point {
            x,
            y,
            params: params.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arith {
    Exact,
    Float(u32),
}

#[derive(Debug, Clone)]
pub enum Value {
    Exact(Rational),
    Float(FloatEval),
}

impl Value {
    /// Exact zero, or |v| < 2^-(prec/2) · max(1, magnitude) in float mode.
    pub fn is_zero(&self) -> bool {
        match self {
            Value::Exact(r) => *r == 0,
            Value::Float(fe) => {
                let prec = fe.value.prec();
                let scale = if fe.magnitude > 1 {
                    fe.magnitude.clone()
                } else {
                    Float::with_val(prec, 1)
                };
                let tol = scale >> (prec / 2);
                fe.value.clone().abs() < tol
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => r.to_f64(),
            Value::Float(fe) => fe.value.to_f64(),
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            Value::Exact(_) => "exact",
            Value::Float(_) => "float",
        }
    }

    pub fn to_decimal(&self) -> String {
        match self {
            Value::Exact(r) => r.to_string(),
            Value::Float(fe) => crate::expr::Number::Float(fe.value.clone()).to_string(),
        }
    }
}

/// Evaluates a compiled program at a sample point.
pub fn eval_at(prog: &Program, arith: Arith, pt: &Point) -> Result<Value, EvalError> {
    let lookup = |n: &String| {
        pt.params
            .get(n)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(n.clone()))
    };
    let params = prog
        .params()
        .iter()
        .map(lookup)
        .collect::<Result<Vec<_>, _>>()?;
    match arith {
        Arith::Exact => prog.eval_exact(&pt.x, &pt.y, &params).map(Value::Exact),
        Arith::Float(prec) => {
            let x = Float::with_val(prec, &pt.x);
            let y = Float::with_val(prec, &pt.y);
            let ps: Vec<Float> = params.iter().map(|p| Float::with_val(prec, p)).collect();
            prog.eval_float(prec, &x, &y, &ps).map(Value::Float)
        }
    }
}

/// Which web constraint a sample point violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Derivative(String),
    Invariant(String),
    Evaluation(EvalError),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Derivative(s) => write!(f, "{s} vanishes"),
            Violation::Invariant(s) => write!(f, "{s}"),
            Violation::Evaluation(e) => write!(f, "{e}"),
        }
    }
}

/// Compiled checks for the sample-point constraints of a web: nonvanishing
/// first derivatives of f and every g_α, a_α ∉ {0, 1}, and pairwise
/// distinct a_α.
pub struct WebGuard {
    derivatives: Vec<(String, Program)>,
    invariants: Vec<Program>,
    params: BTreeSet<String>,
    pub arith: Arith,
}

impl WebGuard {
    pub fn new(web: &WebSpec, precision: u32) -> WebGuard {
        let mut derivatives = Vec::new();
        let mut all: Vec<Expr> = Vec::new();
        let mut push = |name: String, e: Expr| {
            all.push(e.clone());
            derivatives.push((name, Program::compile(&e)));
        };
        push("f_x".into(), partial(&web.f, Var::X));
        push("f_y".into(), partial(&web.f, Var::Y));
        for (i, g) in web.gs.iter().enumerate() {
            push(format!("(g{})_x", i + 4), partial(g, Var::X));
            push(format!("(g{})_y", i + 4), partial(g, Var::Y));
        }
        let invariants: Vec<Program> = (4..=web.d())
            .map(|alpha| {
                let a = basic_invariant(web, alpha).expect("index in range");
                all.push(a.clone());
                Program::compile(&a)
            })
            .collect();
        let rational = all.iter().all(|e| e.is_rational_function());
        let params = std::iter::once(&web.f)
            .chain(&web.gs)
            .flat_map(Expr::params)
            .collect();
        WebGuard {
            derivatives,
            invariants,
            params,
            arith: if rational {
                Arith::Exact
            } else {
                Arith::Float(precision)
            },
        }
    }

    /// Parameters the web functions depend on; every sample needs values
    /// for them even when the tested expression does not.
    pub fn params(&self) -> &BTreeSet<String> {
        &self.params
    }

    pub fn check(&self, pt: &Point) -> Result<(), Violation> {
        for (name, prog) in &self.derivatives {
            let v = eval_at(prog, self.arith, pt).map_err(Violation::Evaluation)?;
            if v.is_zero() {
                return Err(Violation::Derivative(name.clone()));
            }
        }
        let mut values = Vec::with_capacity(self.invariants.len());
        for (i, prog) in self.invariants.iter().enumerate() {
            let v = eval_at(prog, self.arith, pt).map_err(Violation::Evaluation)?;
            let alpha = i + 4;
            if v.is_zero() {
                return Err(Violation::Invariant(format!("a{alpha} = 0")));
            }
            if shifted(&v, -1).is_zero() {
                return Err(Violation::Invariant(format!("a{alpha} = 1")));
            }
            values.push(v);
        }
        for i in 0..values.len() {
            for j in 0..i {
                if difference(&values[i], &values[j]).is_zero() {
                    return Err(Violation::Invariant(format!("a{} = a{}", j + 4, i + 4)));
                }
            }
        }
        Ok(())
    }
}

fn shifted(v: &Value, by: i64) -> Value {
    match v {
        Value::Exact(r) => Value::Exact(Rational::from(r + by)),
        Value::Float(fe) => Value::Float(FloatEval {
            value: Float::with_val(fe.value.prec(), &fe.value + by),
            magnitude: fe.magnitude.clone(),
        }),
    }
}

fn difference(a: &Value, b: &Value) -> Value {
    match (a, b) {
        (Value::Exact(x), Value::Exact(y)) => Value::Exact(Rational::from(x - y)),
        (Value::Float(x), Value::Float(y)) => {
            let prec = x.value.prec();
            let mag = if x.magnitude > y.magnitude {
                x.magnitude.clone()
            } else {
                y.magnitude.clone()
            };
            Value::Float(FloatEval {
                value: Float::with_val(prec, &x.value - &y.value),
                magnitude: mag,
            })
        }
        _ => unreachable!("guard uses one arithmetic mode"),
    }
}
