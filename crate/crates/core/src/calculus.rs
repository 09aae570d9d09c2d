//! Web calculus: the frame operators ∂₁ = −(1/f_x)∂/∂x, ∂₂ = −(1/f_y)∂/∂y
//! and the scalars H, K, a_α and μ_α built from the web functions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops;
use std::sync::{LazyLock, Mutex};

use rug::Rational;
use serde::Serialize;

use crate::expr::{partial, Expr, Kind, Var};

/// Sampling rectangle plus ranges for free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub x: (Rational, Rational),
    pub y: (Rational, Rational),
    pub params: BTreeMap<String, (Rational, Rational)>,
}

pub const PARAM_RANGE: (i64, i64) = (2, 7);

impl Default for Domain {
    fn default() -> Self {
        Domain::rect((1, 4), (3, 4), (1, 4), (3, 4))
    }
}

impl Domain {
    pub fn new(x: (Rational, Rational), y: (Rational, Rational)) -> Result<Domain, WebError> {
        if x.0 >= x.1 || y.0 >= y.1 {
            return Err(WebError::EmptyDomain);
        }
        Ok(Domain {
            x,
            y,
            params: BTreeMap::new(),
        })
    }

    /// Shorthand taking each bound as a fraction `(num, den)`.
    pub fn rect(xlo: (i64, i64), xhi: (i64, i64), ylo: (i64, i64), yhi: (i64, i64)) -> Domain {
        let q = |(n, d): (i64, i64)| Rational::from((n, d));
        Domain::new((q(xlo), q(xhi)), (q(ylo), q(yhi))).expect("non-empty rectangle")
    }

    pub fn with_param(mut self, name: &str, lo: Rational, hi: Rational) -> Domain {
        self.params.insert(name.to_string(), (lo, hi));
        self
    }

    /// Range for a parameter, defaulting to [2, 7].
    pub fn param_range(&self, name: &str) -> (Rational, Rational) {
        self.params
            .get(name)
            .cloned()
            .unwrap_or_else(|| (Rational::from(PARAM_RANGE.0), Rational::from(PARAM_RANGE.1)))
    }

    pub fn as_f64(&self) -> [f64; 4] {
        [
            self.x.0.to_f64(),
            self.x.1.to_f64(),
            self.y.0.to_f64(),
            self.y.1.to_f64(),
        ]
    }

    pub fn contains(&self, x: &Rational, y: &Rational) -> bool {
        *x >= self.x.0 && *x <= self.x.1 && *y >= self.y.0 && *y <= self.y.1
    }
}

/// Parses "3", "-5/2" or "0.125" as an exact rational; decimals are read
/// in base ten, so "0.1" is 1/10.
pub fn parse_number(text: &str) -> Result<Rational, WebError> {
    let t = text.trim();
    let bad = || WebError::BadNumber(t.to_string());
    if let Ok(r) = t.parse::<Rational>() {
        return Ok(r);
    }
    let (sign, digits) = match t.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = digits.split_once('.').ok_or_else(bad)?;
    let all_digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !all_digits(int) || !all_digits(frac) {
        return Err(bad());
    }
    let num: Rational = format!("{int}{frac}")
        .trim_start_matches('0')
        .parse()
        .unwrap_or_default();
    let den = Rational::from(rug::Integer::from(rug::Integer::u_pow_u(
        10,
        frac.len() as u32,
    )));
    Ok(num / den * sign)
}

impl std::str::FromStr for Domain {
    type Err = WebError;

    /// "xlo,xhi,ylo,yhi".
    fn from_str(s: &str) -> Result<Domain, WebError> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(WebError::BadNumber(s.to_string()));
        }
        let v = parts
            .iter()
            .map(|p| parse_number(p))
            .collect::<Result<Vec<_>, _>>()?;
        Domain::new((v[0].clone(), v[1].clone()), (v[2].clone(), v[3].clone()))
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x.0, self.x.1, self.y.0, self.y.1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WebError {
    #[error("a d-web needs d >= 4: give f and at least one g")]
    TooFewFunctions,
    #[error("empty domain rectangle")]
    EmptyDomain,
    #[error("web index {0} out of range")]
    BadIndex(usize),
    #[error("not a number: {0:?}")]
    BadNumber(String),
}

/// A d-web: foliations x = const, y = const, f = const and g_α = const
/// for α = 4..=d.
#[derive(Debug, Clone)]
pub struct WebSpec {
    pub f: Expr,
    pub gs: Vec<Expr>,
    pub domain: Domain,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20050101;

impl WebSpec {
    pub fn new(f: Expr, gs: Vec<Expr>) -> Result<WebSpec, WebError> {
        if gs.is_empty() {
            return Err(WebError::TooFewFunctions);
        }
        Ok(WebSpec {
            f,
            gs,
            domain: Domain::default(),
            seed: DEFAULT_SEED,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> WebSpec {
        self.domain = domain;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> WebSpec {
        self.seed = seed;
        self
    }

    /// Number of foliations: x, y, f and one per g.
    pub fn d(&self) -> usize {
        3 + self.gs.len()
    }

    /// `g_α` for α in 4..=d.
    pub fn g(&self, alpha: usize) -> Result<&Expr, WebError> {
        if alpha < 4 || alpha > self.d() {
            return Err(WebError::BadIndex(alpha));
        }
        Ok(&self.gs[alpha - 4])
    }

    /// The 4-subweb formed with `g_α`.
    pub fn subweb(&self, alpha: usize) -> Result<WebSpec, WebError> {
        let g = self.g(alpha)?.clone();
        Ok(WebSpec {
            f: self.f.clone(),
            gs: vec![g],
            domain: self.domain.clone(),
            seed: self.seed,
        })
    }

    /// Replaces x by p(x) and y by q(y) in every web function.
    pub fn reparametrized(&self, p: &Expr, q: &Expr) -> WebSpec {
        let map = [(Expr::x(), p.clone()), (Expr::y(), q.clone())];
        WebSpec {
            f: self.f.substitute(&map),
            gs: self.gs.iter().map(|g| g.substitute(&map)).collect(),
            domain: self.domain.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    D1,
    D2,
}

type FrameKey = (u64, Frame, u64);

static FRAME_MEMO: LazyLock<Mutex<HashMap<FrameKey, Expr>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn frame(e: &Expr, op: Frame, f: &Expr) -> Expr {
    let key = (e.id(), op, f.id());
    if let Some(d) = FRAME_MEMO.lock().expect("frame cache poisoned").get(&key) {
        return d.clone();
    }
    let v = match op {
        Frame::D1 => Var::X,
        Frame::D2 => Var::Y,
    };
    let d = Expr::neg(Expr::div(partial(e, v), partial(f, v)));
    FRAME_MEMO
        .lock()
        .expect("frame cache poisoned")
        .insert(key, d.clone());
    d
}

/// ∂₁e = −e_x / f_x.
pub fn d1(e: &Expr, web: &WebSpec) -> Expr {
    frame(e, Frame::D1, &web.f)
}

/// ∂₂e = −e_y / f_y.
pub fn d2(e: &Expr, web: &WebSpec) -> Expr {
    frame(e, Frame::D2, &web.f)
}

pub fn web_h(web: &WebSpec) -> Expr {
    let fx = partial(&web.f, Var::X);
    let fy = partial(&web.f, Var::Y);
    let fxy = partial(&fx, Var::Y);
    Expr::div(fxy, Expr::mul(vec![fx, fy]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMode {
    /// K = ∂₁H − ∂₂H.
    Structure,
    /// K = −(log(f_x/f_y))_xy / (f_x f_y).
    Log,
}

pub fn web_k(web: &WebSpec, mode: CurvatureMode) -> Expr {
    match mode {
        CurvatureMode::Structure => {
            let h = web_h(web);
            Expr::sub(d1(&h, web), d2(&h, web))
        }
        CurvatureMode::Log => {
            let fx = partial(&web.f, Var::X);
            let fy = partial(&web.f, Var::Y);
            let l = Expr::log(Expr::div(fx.clone(), fy.clone()));
            let lxy = partial(&partial(&l, Var::X), Var::Y);
            Expr::neg(Expr::div(lxy, Expr::mul(vec![fx, fy])))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantFormula {
    /// a = f_y g_x / (f_x g_y).
    Quotient,
    /// a = ∂₁g / ∂₂g.
    Frame,
}

pub fn basic_invariant_with(
    web: &WebSpec,
    alpha: usize,
    formula: InvariantFormula,
) -> Result<Expr, WebError> {
    let g = web.g(alpha)?;
    Ok(basic_invariant_of(web, g, formula))
}

pub fn basic_invariant(web: &WebSpec, alpha: usize) -> Result<Expr, WebError> {
    basic_invariant_with(web, alpha, InvariantFormula::Quotient)
}

/// The basic invariant of the 4-web ⟨x, y, f, p⟩.
pub fn basic_invariant_of(web: &WebSpec, p: &Expr, formula: InvariantFormula) -> Expr {
    match formula {
        InvariantFormula::Quotient => {
            // With exponentials present, p_x/p_y is taken as a ratio of
            // logarithmic derivatives so that exponential factors cancel.
            let fx = partial(&web.f, Var::X);
            let fy = partial(&web.f, Var::Y);
            let has_exp = p
                .topo_order()
                .iter()
                .any(|n| matches!(n.kind(), Kind::Exp(_)));
            let d = |v| if has_exp { dlog(p, v) } else { partial(p, v) };
            let (px, py) = (d(Var::X), d(Var::Y));
            Expr::div(Expr::mul(vec![fy, px]), Expr::mul(vec![fx, py]))
        }
        InvariantFormula::Frame => Expr::div(d1(p, web), d2(p, web)),
    }
}

/// Logarithmic derivative e_v/e, split over products, quotients, powers
/// and exponentials. Agrees with `partial(e, v)/e` wherever e ≠ 0.
pub fn dlog(e: &Expr, v: Var) -> Expr {
    match e.kind() {
        Kind::Const(_) | Kind::Param(_) => Expr::zero(),
        Kind::Mul(fs) => Expr::add(fs.iter().map(|f| dlog(f, v)).collect()),
        Kind::Div(a, b) => Expr::sub(dlog(a, v), dlog(b, v)),
        Kind::Neg(a) => dlog(a, v),
        Kind::Pow(b, r) => Expr::mul(vec![Expr::constant(r.clone()), dlog(b, v)]),
        Kind::Exp(u) => partial(u, v),
        _ => Expr::div(partial(e, v), e.clone()),
    }
}

/// μ = (∂₁a − a∂₂a)/(a − a²).
pub fn mu_of(a: &Expr, web: &WebSpec) -> Expr {
    let num = Expr::sub(d1(a, web), Expr::mul(vec![a.clone(), d2(a, web)]));
    let den = Expr::sub(a.clone(), Expr::powi(a.clone(), 2));
    Expr::div(num, den)
}

pub fn mu(web: &WebSpec, alpha: usize) -> Result<Expr, WebError> {
    Ok(mu_of(&basic_invariant(web, alpha)?, web))
}

/// Highest derivative order of f, g and the basic invariant a that an
/// expression depends on. `None` means no dependence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DiffOrder {
    pub f: Option<u8>,
    pub g: Option<u8>,
    pub a: Option<u8>,
}

fn omax(a: Option<u8>, b: Option<u8>) -> Option<u8> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl DiffOrder {
    pub fn join(self, o: DiffOrder) -> DiffOrder {
        DiffOrder {
            f: omax(self.f, o.f),
            g: omax(self.g, o.g),
            a: omax(self.a, o.a),
        }
    }

    /// Order after one frame derivative: every dependence goes up by one
    /// and the operator itself brings in f_x or f_y.
    pub fn differentiated(self) -> DiffOrder {
        let up = |o: Option<u8>| o.map(|k| k + 1);
        DiffOrder {
            f: omax(up(self.f), Some(1)),
            g: up(self.g),
            a: up(self.a),
        }
    }
}

/// An expression together with its derivative orders, so that invariant
/// construction can assert the order bounds as it goes.
#[derive(Debug, Clone)]
pub struct Tracked {
    pub expr: Expr,
    pub order: DiffOrder,
}

impl Tracked {
    pub fn constant(e: Expr) -> Tracked {
        Tracked {
            expr: e,
            order: DiffOrder::default(),
        }
    }

    pub fn int(i: i64) -> Tracked {
        Tracked::constant(Expr::int(i))
    }

    pub fn f(web: &WebSpec) -> Tracked {
        Tracked {
            expr: web.f.clone(),
            order: DiffOrder {
                f: Some(0),
                ..Default::default()
            },
        }
    }

    pub fn g(p: &Expr) -> Tracked {
        Tracked {
            expr: p.clone(),
            order: DiffOrder {
                g: Some(0),
                ..Default::default()
            },
        }
    }

    pub fn h(web: &WebSpec) -> Tracked {
        Tracked {
            expr: web_h(web),
            order: DiffOrder {
                f: Some(2),
                ..Default::default()
            },
        }
    }

    pub fn k(web: &WebSpec) -> Tracked {
        let h = Tracked::h(web);
        h.d1(web) - h.d2(web)
    }

    /// The basic invariant of ⟨x, y, f, p⟩, treated as a primitive of
    /// order zero in a.
    pub fn a(web: &WebSpec, p: &Expr) -> Tracked {
        Tracked {
            expr: basic_invariant_of(web, p, InvariantFormula::Quotient),
            order: DiffOrder {
                f: Some(1),
                g: Some(1),
                a: Some(0),
            },
        }
    }

    pub fn mu(web: &WebSpec, a: &Tracked) -> Tracked {
        let num = a.d1(web) - a.clone() * a.d2(web);
        let den = a.clone() - a.clone() * a.clone();
        num / den
    }

    pub fn d1(&self, web: &WebSpec) -> Tracked {
        Tracked {
            expr: d1(&self.expr, web),
            order: self.order.differentiated(),
        }
    }

    pub fn d2(&self, web: &WebSpec) -> Tracked {
        Tracked {
            expr: d2(&self.expr, web),
            order: self.order.differentiated(),
        }
    }

    pub fn powi(&self, n: i64) -> Tracked {
        Tracked {
            expr: Expr::powi(self.expr.clone(), n),
            order: self.order,
        }
    }

    pub fn scale(&self, r: Rational) -> Tracked {
        Tracked {
            expr: Expr::mul(vec![Expr::constant(r), self.expr.clone()]),
            order: self.order,
        }
    }
}

macro_rules! tracked_binop {
    ($trait:ident, $method:ident, $build:expr) => {
        impl ops::$trait for Tracked {
            type Output = Tracked;
            fn $method(self, rhs: Tracked) -> Tracked {
                Tracked {
                    expr: $build(self.expr, rhs.expr),
                    order: self.order.join(rhs.order),
                }
            }
        }
    };
}

tracked_binop!(Add, add, |a, b| Expr::add(vec![a, b]));
tracked_binop!(Sub, sub, Expr::sub);
tracked_binop!(Mul, mul, |a, b| Expr::mul(vec![a, b]));
tracked_binop!(Div, div, Expr::div);

impl ops::Neg for Tracked {
    type Output = Tracked;
    fn neg(self) -> Tracked {
        Tracked {
            expr: Expr::neg(self.expr),
            order: self.order,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, parse, EvalContext, Number};

    fn web(f: &str, g: &str) -> WebSpec {
        WebSpec::new(parse(f).unwrap(), vec![parse(g).unwrap()]).unwrap()
    }

    fn exact(e: &Expr, x: (i64, i64), y: (i64, i64)) -> Rational {
        let ctx = EvalContext::exact().at(Rational::from(x), Rational::from(y));
        match evaluate(e, &ctx).unwrap() {
            Number::Exact(r) => r,
            Number::Float(_) => panic!("expected exact"),
        }
    }

    const POINTS: [((i64, i64), (i64, i64)); 4] = [
        ((1, 3), (2, 5)),
        ((3, 7), (5, 11)),
        ((2, 3), (1, 4)),
        ((5, 8), (3, 10)),
    ];

    #[test]
    fn numbers_and_domains_parse() {
        assert_eq!(parse_number("-5/2").unwrap(), Rational::from((-5, 2)));
        assert_eq!(parse_number("0.1").unwrap(), Rational::from((1, 10)));
        assert_eq!(parse_number("-.25").unwrap(), Rational::from((-1, 4)));
        assert_eq!(parse_number("3.").unwrap(), 3);
        assert!(parse_number("1e3").is_err());
        assert!(parse_number(".").is_err());
        let d: Domain = "0.25, 3/4, 1, 2".parse().unwrap();
        assert_eq!(d.y.1, 2);
        assert_eq!(d.to_string().parse::<Domain>().unwrap(), d);
        assert_eq!("1,0,0,1".parse::<Domain>(), Err(WebError::EmptyDomain));
        assert!("1,2,3".parse::<Domain>().is_err());
    }

    #[test]
    fn frame_operator_on_pencil_web() {
        let w = web("x/y", "x+y");
        let a = parse("-x/y").unwrap();
        for (x, y) in POINTS {
            assert_eq!(exact(&d1(&a, &w), x, y), 1);
            assert_eq!(exact(&d1(&Expr::int(5), &w), x, y), 0);
        }
    }

    #[test]
    fn h_and_k_of_product_web() {
        let w = web("x*y", "x-y");
        let expected_h = parse("1/(x*y)").unwrap();
        for (x, y) in POINTS {
            assert_eq!(exact(&web_h(&w), x, y), exact(&expected_h, x, y));
            assert_eq!(exact(&web_k(&w, CurvatureMode::Structure), x, y), 0);
        }
    }

    #[test]
    fn linear_web_is_flat() {
        let w = web("x+y", "x-y");
        assert_eq!(web_h(&w), Expr::zero());
        assert_eq!(web_k(&w, CurvatureMode::Structure), Expr::zero());
        let a = basic_invariant(&w, 4).unwrap();
        assert_eq!(exact(&a, (1, 3), (1, 5)), -1);
        assert_eq!(exact(&mu(&w, 4).unwrap(), (1, 3), (1, 5)), 0);
    }

    #[test]
    fn pencil_web_invariants() {
        let w = web("x/y", "x+y");
        let a = basic_invariant(&w, 4).unwrap();
        let m = mu(&w, 4).unwrap();
        let expected_a = parse("-x/y").unwrap();
        let expected_mu = parse("-y/x").unwrap();
        for (x, y) in POINTS {
            assert_eq!(exact(&a, x, y), exact(&expected_a, x, y));
            assert_eq!(exact(&m, x, y), exact(&expected_mu, x, y));
        }
    }

    #[test]
    fn curvature_formulas_agree_on_rational_web() {
        let w = web("(1-y)/(1-x)", "x/y");
        let ks = web_k(&w, CurvatureMode::Structure);
        // The log form is not rational; compare in float.
        let kl = web_k(&w, CurvatureMode::Log);
        for (x, y) in POINTS {
            let ctx = EvalContext::float(256).at(Rational::from(x), Rational::from(y));
            let d = evaluate(&(ks.clone() - kl.clone()), &ctx).unwrap().to_f64();
            assert!(d.abs() < 1e-60);
        }
    }

    #[test]
    fn scalar_commutator() {
        // [∂₁, ∂₂]e = H(∂₂e − ∂₁e)
        let w = web("x + sqrt(x^2 - y)", "x+y");
        let e = parse("x^2*y + exp(x*y)").unwrap();
        let h = web_h(&w);
        let lhs = d1(&d2(&e, &w), &w) - d2(&d1(&e, &w), &w);
        let rhs = h * (d2(&e, &w) - d1(&e, &w));
        let ctx = EvalContext::float(256).at(Rational::from((2, 1)), Rational::from((1, 2)));
        let d = evaluate(&(lhs - rhs), &ctx).unwrap().to_f64();
        assert!(d.abs() < 1e-60, "{d}");
    }

    #[test]
    fn order_tracking() {
        let w = web("x/y", "x+y");
        let a = Tracked::a(&w, &w.gs[0]);
        let m = Tracked::mu(&w, &a);
        assert_eq!(
            m.order,
            DiffOrder {
                f: Some(2),
                g: Some(2),
                a: Some(1)
            }
        );
        assert_eq!(Tracked::k(&w).order.f, Some(3));
    }

    #[test]
    fn web_needs_four_foliations() {
        assert_eq!(
            WebSpec::new(Expr::x(), vec![]).unwrap_err(),
            WebError::TooFewFunctions
        );
    }
}
