//! Evaluation of expression DAGs: exact rational, multi-precision float
//! (MPFR, every operation correctly rounded) and plain `f64`.
//!
//! A [`Program`] is the DAG flattened into children-first order so that
//! repeated evaluation at many sample points does not re-walk the graph.

use std::collections::BTreeMap;
use std::fmt;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use super::{integer_exponent, Expr, Kind, Var};

pub const DEFAULT_PRECISION: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float { precision: u32 },
}

impl Mode {
    pub fn float() -> Mode {
        Mode::Float {
            precision: DEFAULT_PRECISION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Number {
    Exact(Rational),
    Float(Float),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => r.to_f64(),
            Number::Float(f) => f.to_f64(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Exact(r) => *r == 0,
            Number::Float(f) => f.is_zero(),
        }
    }

    fn to_float(&self, precision: u32) -> Float {
        match self {
            Number::Exact(r) => Float::with_val(precision, r),
            Number::Float(f) => Float::with_val(precision, f),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) => write!(f, "{r}"),
            Number::Float(v) => write!(f, "{}", format_float(v)),
        }
    }
}

/// Scientific notation with 20 significant digits.
pub(crate) fn format_float(v: &Float) -> String {
    if v.is_zero() {
        return "0".into();
    }
    v.to_string_radix(10, Some(20))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("singular sample: division by zero")]
    SingularSample,
    #[error("negative radicand in real evaluation")]
    NegativeRadicand,
    #[error("logarithm of a non-positive number")]
    NonPositiveLog,
    #[error("exact arithmetic refused: expression contains a transcendental or irrational node")]
    ExactRefused,
    #[error("unbound symbol '{0}'")]
    Unbound(String),
    #[error("non-finite intermediate value")]
    NonFinite,
}

/// Symbol bindings plus arithmetic mode. Every symbol occurring in the
/// evaluated expression must be bound.
#[derive(Debug, Clone)]
pub struct EvalContext {
    bindings: BTreeMap<String, Number>,
    pub mode: Mode,
}

impl EvalContext {
    pub fn new(mode: Mode) -> EvalContext {
        EvalContext {
            bindings: BTreeMap::new(),
            mode,
        }
    }

    pub fn exact() -> EvalContext {
        EvalContext::new(Mode::Exact)
    }

    pub fn float(precision: u32) -> EvalContext {
        EvalContext::new(Mode::Float { precision })
    }

    pub fn bind(mut self, name: &str, value: Number) -> EvalContext {
        self.bindings.insert(name.to_string(), value);
        self
    }

    pub fn bind_rational(self, name: &str, value: Rational) -> EvalContext {
        self.bind(name, Number::Exact(value))
    }

    pub fn at(self, x: Rational, y: Rational) -> EvalContext {
        self.bind_rational("x", x).bind_rational("y", y)
    }

    pub fn get(&self, name: &str) -> Option<&Number> {
        self.bindings.get(name)
    }
}

/// Result of a float evaluation. `magnitude` is the largest absolute value
/// of any intermediate node, used to scale the zero threshold.
#[derive(Debug, Clone)]
pub struct FloatEval {
    pub value: Float,
    pub magnitude: Float,
}

#[derive(Debug, Clone)]
enum Op {
    Const(usize),
    Var(Var),
    Param(usize),
    Add(Vec<usize>),
    Mul(Vec<usize>),
    Div(usize, usize),
    Pow(usize, usize),
    Exp(usize),
    Log(usize),
    Neg(usize),
}

/// A DAG flattened for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    consts: Vec<Rational>,
    consts_f64: Vec<f64>,
    params: Vec<String>,
    rational: bool,
    outputs: Vec<usize>,
}

impl Program {
    pub fn compile(e: &Expr) -> Program {
        Program::compile_many(std::slice::from_ref(e))
    }

    /// One program computing several expressions with shared subterms.
    /// The `eval_*` methods return the first root; [`Program::eval_f64_many`]
    /// returns all of them.
    pub fn compile_many(roots: &[Expr]) -> Program {
        let order = super::topo_order_many(roots);
        let mut slot = std::collections::HashMap::with_capacity(order.len());
        let mut ops = Vec::with_capacity(order.len());
        let mut consts = Vec::new();
        let mut params: Vec<String> = Vec::new();
        let mut rational = true;
        for node in &order {
            let s = |c: &Expr| slot[&c.id()];
            let op = match node.kind() {
                Kind::Const(r) => {
                    consts.push(r.clone());
                    Op::Const(consts.len() - 1)
                }
                Kind::Var(v) => Op::Var(*v),
                Kind::Param(p) => {
                    let idx = match params.iter().position(|q| q == &**p) {
                        Some(i) => i,
                        None => {
                            params.push(p.to_string());
                            params.len() - 1
                        }
                    };
                    Op::Param(idx)
                }
                Kind::Add(v) => Op::Add(v.iter().map(s).collect()),
                Kind::Mul(v) => Op::Mul(v.iter().map(s).collect()),
                Kind::Div(a, b) => Op::Div(s(a), s(b)),
                Kind::Pow(a, r) => {
                    if r.denom() != &1 {
                        rational = false;
                    }
                    consts.push(r.clone());
                    Op::Pow(s(a), consts.len() - 1)
                }
                Kind::Exp(a) => {
                    rational = false;
                    Op::Exp(s(a))
                }
                Kind::Log(a) => {
                    rational = false;
                    Op::Log(s(a))
                }
                Kind::Neg(a) => Op::Neg(s(a)),
            };
            slot.insert(node.id(), ops.len());
            ops.push(op);
        }
        let consts_f64 = consts.iter().map(|r| r.to_f64()).collect();
        let outputs = roots.iter().map(|r| slot[&r.id()]).collect();
        Program {
            ops,
            consts,
            consts_f64,
            params,
            rational,
            outputs,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Parameter names in the order expected by the `eval_*` methods.
    pub fn params(&self) -> &[String] {
        &self.params
    }

    /// True when exact evaluation is possible (no exp/log/fractional power).
    pub fn is_rational(&self) -> bool {
        self.rational
    }

    pub fn eval_exact(
        &self,
        x: &Rational,
        y: &Rational,
        params: &[Rational],
    ) -> Result<Rational, EvalError> {
        let mut vals: Vec<Rational> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match op {
                Op::Const(i) => self.consts[*i].clone(),
                Op::Var(Var::X) => x.clone(),
                Op::Var(Var::Y) => y.clone(),
                Op::Param(i) => params
                    .get(*i)
                    .cloned()
                    .ok_or_else(|| EvalError::Unbound(self.params[*i].clone()))?,
                Op::Add(v) => {
                    let mut acc = Rational::new();
                    for &c in v {
                        acc += &vals[c];
                    }
                    acc
                }
                Op::Mul(v) => {
                    let mut acc = Rational::from(1);
                    for &c in v {
                        acc *= &vals[c];
                    }
                    acc
                }
                Op::Div(a, b) => {
                    if vals[*b] == 0 {
                        return Err(EvalError::SingularSample);
                    }
                    Rational::from(&vals[*a] / &vals[*b])
                }
                Op::Pow(a, r) => {
                    let base = &vals[*a];
                    let r = &self.consts[*r];
                    match exact_rational_power(base, r) {
                        Some(v) => v,
                        None if *base == 0 => return Err(EvalError::SingularSample),
                        None if *base < 0 => return Err(EvalError::NegativeRadicand),
                        None => return Err(EvalError::ExactRefused),
                    }
                }
                Op::Exp(a) => {
                    if vals[*a] == 0 {
                        Rational::from(1)
                    } else {
                        return Err(EvalError::ExactRefused);
                    }
                }
                Op::Log(a) => {
                    if vals[*a] <= 0 {
                        return Err(EvalError::NonPositiveLog);
                    } else if vals[*a] == 1 {
                        Rational::new()
                    } else {
                        return Err(EvalError::ExactRefused);
                    }
                }
                Op::Neg(a) => Rational::from(-&vals[*a]),
            };
            vals.push(v);
        }
        Ok(vals.swap_remove(self.outputs[0]))
    }

    pub fn eval_float(
        &self,
        precision: u32,
        x: &Float,
        y: &Float,
        params: &[Float],
    ) -> Result<FloatEval, EvalError> {
        let mut vals: Vec<Float> = Vec::with_capacity(self.ops.len());
        let mut magnitude = Float::with_val(precision, 0);
        for op in &self.ops {
            let v = match op {
                Op::Const(i) => Float::with_val(precision, &self.consts[*i]),
                Op::Var(Var::X) => Float::with_val(precision, x),
                Op::Var(Var::Y) => Float::with_val(precision, y),
                Op::Param(i) => Float::with_val(
                    precision,
                    params
                        .get(*i)
                        .ok_or_else(|| EvalError::Unbound(self.params[*i].clone()))?,
                ),
                Op::Add(v) => {
                    let mut acc = Float::with_val(precision, 0);
                    for &c in v {
                        acc += &vals[c];
                    }
                    acc
                }
                Op::Mul(v) => {
                    let mut acc = Float::with_val(precision, 1);
                    for &c in v {
                        acc *= &vals[c];
                    }
                    acc
                }
                Op::Div(a, b) => {
                    if vals[*b].is_zero() {
                        return Err(EvalError::SingularSample);
                    }
                    Float::with_val(precision, &vals[*a] / &vals[*b])
                }
                Op::Pow(a, r) => float_power(&vals[*a], &self.consts[*r], precision)?,
                Op::Exp(a) => Float::with_val(precision, vals[*a].exp_ref()),
                Op::Log(a) => {
                    if vals[*a] <= 0 {
                        return Err(EvalError::NonPositiveLog);
                    }
                    Float::with_val(precision, vals[*a].ln_ref())
                }
                Op::Neg(a) => Float::with_val(precision, -&vals[*a]),
            };
            if !v.is_finite() {
                return Err(EvalError::NonFinite);
            }
            let abs = Float::with_val(precision, v.abs_ref());
            if abs > magnitude {
                magnitude = abs;
            }
            vals.push(v);
        }
        Ok(FloatEval {
            value: vals.swap_remove(self.outputs[0]),
            magnitude,
        })
    }

    /// Double-precision evaluation; singularities produce NaN or infinity.
    pub fn eval_f64(&self, x: f64, y: f64, params: &[f64]) -> f64 {
        let mut scratch = Vec::with_capacity(self.ops.len());
        self.run_f64(x, y, params, &mut scratch);
        scratch[self.outputs[0]]
    }

    /// Evaluates every root into `out`, reusing `scratch` between calls.
    pub fn eval_f64_many(
        &self,
        x: f64,
        y: f64,
        params: &[f64],
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        self.run_f64(x, y, params, scratch);
        for (o, &slot) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[slot];
        }
    }

    fn run_f64(&self, x: f64, y: f64, params: &[f64], vals: &mut Vec<f64>) {
        vals.clear();
        for op in &self.ops {
            let v = match op {
                Op::Const(i) => self.consts_f64[*i],
                Op::Var(Var::X) => x,
                Op::Var(Var::Y) => y,
                Op::Param(i) => params.get(*i).copied().unwrap_or(f64::NAN),
                Op::Add(v) => v.iter().map(|&c| vals[c]).sum(),
                Op::Mul(v) => v.iter().map(|&c| vals[c]).product(),
                Op::Div(a, b) => vals[*a] / vals[*b],
                Op::Pow(a, ri) => {
                    let base = vals[*a];
                    let r = &self.consts[*ri];
                    match integer_exponent(r) {
                        Some(n) => base.powi(n),
                        None if *r.denom() == 2 && *r.numer() == 1 => base.sqrt(),
                        None if base < 0.0 => f64::NAN,
                        None => base.powf(self.consts_f64[*ri]),
                    }
                }
                Op::Exp(a) => vals[*a].exp(),
                Op::Log(a) => vals[*a].ln(),
                Op::Neg(a) => -vals[*a],
            };
            vals.push(v);
        }
    }
}

fn float_power(base: &Float, r: &Rational, precision: u32) -> Result<Float, EvalError> {
    if let Some(n) = integer_exponent(r) {
        if base.is_zero() && n < 0 {
            return Err(EvalError::SingularSample);
        }
        return Ok(Float::with_val(precision, base.pow(n)));
    }
    if *base < 0 {
        return Err(EvalError::NegativeRadicand);
    }
    if base.is_zero() {
        return if *r < 0 {
            Err(EvalError::SingularSample)
        } else {
            Ok(Float::with_val(precision, 0))
        };
    }
    let q = r.denom().to_u32().ok_or(EvalError::NonFinite)?;
    let p = r.numer().to_i32().ok_or(EvalError::NonFinite)?;
    let root = if q == 2 {
        Float::with_val(precision, base.sqrt_ref())
    } else {
        Float::with_val(precision, base.root_ref(q))
    };
    Ok(Float::with_val(precision, root.pow(p)))
}

fn exact_root(n: &Integer, q: u32) -> Option<Integer> {
    let r = Integer::from(n.root_ref(q));
    if Integer::from((&r).pow(q)) == *n {
        Some(r)
    } else {
        None
    }
}

/// `base^r` when the result is rational, else `None`.
pub(crate) fn exact_rational_power(base: &Rational, r: &Rational) -> Option<Rational> {
    let p = r.numer().to_i32()?;
    let q = r.denom().to_u32()?;
    if *base == 0 {
        return if p > 0 { Some(Rational::new()) } else { None };
    }
    let root = if q == 1 {
        base.clone()
    } else {
        if *base < 0 {
            return None;
        }
        let num = exact_root(base.numer(), q)?;
        let den = exact_root(base.denom(), q)?;
        Rational::from((num, den))
    };
    Some(Rational::from((&root).pow(p)))
}

/// Evaluates `e` under `ctx`. Exact mode is refused for expressions that
/// contain transcendental or irrational nodes.
pub fn evaluate(e: &Expr, ctx: &EvalContext) -> Result<Number, EvalError> {
    let prog = Program::compile(e);
    let lookup = |name: &str| {
        ctx.get(name)
            .ok_or_else(|| EvalError::Unbound(name.to_string()))
    };
    let uses = |v: Var| e.depends_on(v);
    match ctx.mode {
        Mode::Exact => {
            if !prog.is_rational() {
                return Err(EvalError::ExactRefused);
            }
            let rational = |name: &str| -> Result<Rational, EvalError> {
                match lookup(name)? {
                    Number::Exact(r) => Ok(r.clone()),
                    Number::Float(_) => Err(EvalError::ExactRefused),
                }
            };
            let x = if uses(Var::X) {
                rational("x")?
            } else {
                Rational::new()
            };
            let y = if uses(Var::Y) {
                rational("y")?
            } else {
                Rational::new()
            };
            let params = prog
                .params()
                .iter()
                .map(|p| rational(p))
                .collect::<Result<Vec<_>, _>>()?;
            prog.eval_exact(&x, &y, &params).map(Number::Exact)
        }
        Mode::Float { precision } => {
            let float = |name: &str| lookup(name).map(|n| n.to_float(precision));
            let zero = Float::with_val(precision, 0);
            let x = if uses(Var::X) {
                float("x")?
            } else {
                zero.clone()
            };
            let y = if uses(Var::Y) { float("y")? } else { zero };
            let params = prog
                .params()
                .iter()
                .map(|p| float(p))
                .collect::<Result<Vec<_>, _>>()?;
            prog.eval_float(precision, &x, &y, &params)
                .map(|r| Number::Float(r.value))
        }
    }
}
