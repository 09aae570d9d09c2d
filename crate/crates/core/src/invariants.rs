//! Linearizability invariants and the randomized zero test that decides
//! whether they vanish identically.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{d1, d2, DiffOrder, Domain, Tracked, WebSpec};
use crate::expr::{simplify, Expr, Program, DEFAULT_PRECISION};
use crate::sample::{eval_at, Arith, Point, Sampler, Value, WebGuard};

/// Bounds on the derivative orders of I₁, I₂: four in f and in g, three in
/// the basic invariant a.
pub const MAX_F_ORDER: u8 = 4;
pub const MAX_G_ORDER: u8 = 4;
pub const MAX_A_ORDER: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Zero,
    Nonzero,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Zero => "ZERO",
            Verdict::Nonzero => "NONZERO",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum WebVerdict {
    Yes,
    No,
    Inconclusive,
}

impl fmt::Display for WebVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WebVerdict::Yes => "YES",
            WebVerdict::No => "NO",
            WebVerdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

impl WebVerdict {
    /// NO as soon as one invariant is NONZERO; YES only if all are ZERO.
    pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> WebVerdict {
        let mut all_zero = true;
        for v in verdicts {
            match v {
                Verdict::Nonzero => return WebVerdict::No,
                Verdict::Inconclusive => all_zero = false,
                Verdict::Zero => {}
            }
        }
        if all_zero {
            WebVerdict::Yes
        } else {
            WebVerdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZeroTestPolicy {
    pub points: usize,
    pub param_draws: usize,
    pub precision: u32,
    pub max_rejections: usize,
    /// Evaluate in floats even when exact arithmetic is possible.
    pub force_float: bool,
}

impl Default for ZeroTestPolicy {
    fn default() -> Self {
        ZeroTestPolicy {
            points: 8,
            param_draws: 3,
            precision: DEFAULT_PRECISION,
            max_rejections: 100,
            force_float: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evidence {
    pub point: Point,
    pub residual: Value,
}

impl Evidence {
    pub fn passed(&self) -> bool {
        self.residual.is_zero()
    }
}

#[derive(Debug, Clone)]
pub struct ZeroTest {
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
    pub arith: Arith,
    pub reason: Option<String>,
}

/// Randomized identity test: ZERO iff `e` vanishes at every scheduled
/// sample. Exact arithmetic when `e` is a rational function, otherwise
/// floats with a magnitude-scaled threshold; a float NONZERO needs two
/// failing points.
pub fn zero_test(e: &Expr, web: &WebSpec, policy: &ZeroTestPolicy) -> ZeroTest {
    let guard = WebGuard::new(web, policy.precision);
    zero_test_guarded(e, web, &guard, policy)
}

pub fn zero_test_guarded(
    e: &Expr,
    web: &WebSpec,
    guard: &WebGuard,
    policy: &ZeroTestPolicy,
) -> ZeroTest {
    let prog = Program::compile(e);
    let mut names = e.params();
    names.extend(guard.params().iter().cloned());
    let names: Vec<String> = names.into_iter().collect();
    let arith = if prog.is_rational() && !policy.force_float {
        Arith::Exact
    } else {
        Arith::Float(policy.precision)
    };
    let draws = if names.is_empty() {
        1
    } else {
        policy.param_draws.max(1)
    };
    let mut sampler = Sampler::new(&web.domain, web.seed, 0);
    let mut evidence = Vec::new();
    let mut rejections = 0;
    let mut failures = 0;
    let done = |verdict, evidence, reason: Option<String>| ZeroTest {
        verdict,
        evidence,
        arith,
        reason,
    };
    for _ in 0..draws {
        let params = sampler.params(&names);
        let mut accepted = 0;
        while accepted < policy.points {
            let batch: Vec<Point> = (accepted..policy.points)
                .map(|_| sampler.point(&params))
                .collect();
            let results: Vec<Result<Value, String>> = batch
                .par_iter()
                .map(|pt| {
                    guard.check(pt).map_err(|v| v.to_string())?;
                    eval_at(&prog, arith, pt).map_err(|err| err.to_string())
                })
                .collect();
            for (point, result) in batch.into_iter().zip(results) {
                match result {
                    Ok(residual) => {
                        accepted += 1;
                        let zero = residual.is_zero();
                        evidence.push(Evidence { point, residual });
                        if !zero {
                            failures += 1;
                            if arith == Arith::Exact || failures >= 2 {
                                return done(Verdict::Nonzero, evidence, None);
                            }
                        }
                    }
                    Err(why) => {
                        rejections += 1;
                        if rejections > policy.max_rejections {
                            let reason = format!("domain too singular (last rejection: {why})");
                            return done(Verdict::Inconclusive, evidence, Some(reason));
                        }
                    }
                }
            }
        }
    }
    if failures > 0 {
        let reason = "a single float sample exceeded the threshold".to_string();
        return done(Verdict::Inconclusive, evidence, Some(reason));
    }
    done(Verdict::Zero, evidence, None)
}

/// I₁(μ) built term by term from the compatibility equation.
pub fn i1_of_mu(mu: &Tracked, web: &WebSpec) -> Tracked {
    let h = Tracked::h(web);
    let k = Tracked::k(web);
    let m1 = mu.d1(web);
    let m2 = mu.d2(web);
    let two = || Tracked::int(2);
    -m1.d1(web) + two() * mu.d2(web).d1(web) + (mu.clone() + h.clone()) * m1
        - two() * (two() * h.clone() + mu.clone()) * m2
        + h.clone() * mu.powi(2)
        + (two() * h.powi(2) - h.d2(web)) * mu.clone()
        - k.d1(web)
        + two() * h * k
}

/// I₂(μ) built term by term from the compatibility equation.
pub fn i2_of_mu(mu: &Tracked, web: &WebSpec) -> Tracked {
    let h = Tracked::h(web);
    let k = Tracked::k(web);
    let m1 = mu.d1(web);
    let m2 = mu.d2(web);
    let two = || Tracked::int(2);
    -m2.d2(web) + two() * mu.d2(web).d1(web) + two() * (mu.clone() - h.clone()) * m1
        - (h.clone() + mu.clone()) * m2
        - h.clone() * mu.powi(2)
        + (two() * h.powi(2) - h.d1(web)) * mu.clone()
        - k.d2(web)
        + two() * h * k
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantError {
    #[error("degenerate direction: ∂₁p ≡ ∂₂p, so p defines the same foliation as f")]
    DegenerateDirection,
    #[error("derivative order bound exceeded: {0:?}")]
    OrderBound(DiffOrder),
}

/// I₁ and I₂ of the 4-subweb ⟨x, y, f, p⟩. Fails if the recorded
/// differentiation depth exceeds four in f or three in a.
pub fn basic_pair(web: &WebSpec, p: &Expr) -> Result<(Tracked, Tracked), InvariantError> {
    let a = Tracked::a(web, p);
    let mu = Tracked::mu(web, &a);
    let i1 = i1_of_mu(&mu, web);
    let i2 = i2_of_mu(&mu, web);
    for t in [&i1, &i2] {
        let within = t.order.f.is_none_or(|k| k <= MAX_F_ORDER)
            && t.order.g.is_none_or(|k| k <= MAX_G_ORDER)
            && t.order.a.is_none_or(|k| k <= MAX_A_ORDER);
        if !within {
            return Err(InvariantError::OrderBound(t.order));
        }
    }
    Ok((i1, i2))
}

/// I(f, p) = [(∂₁p)²∂₂²p − 2∂₁p∂₂p∂₁∂₂p + (∂₂p)²∂₁²p] / [∂₁p∂₂p(∂₂p − ∂₁p)].
pub fn i_fp(web: &WebSpec, p: &Expr) -> Result<Expr, InvariantError> {
    let p1 = d1(p, web);
    let p2 = d2(p, web);
    if simplify(&Expr::sub(p2.clone(), p1.clone())).is_zero() {
        return Err(InvariantError::DegenerateDirection);
    }
    let p11 = d1(&p1, web);
    let p22 = d2(&p2, web);
    let p12 = d1(&p2, web);
    let sq = |e: &Expr| Expr::powi(e.clone(), 2);
    let num = Expr::add(vec![
        Expr::mul(vec![sq(&p1), p22]),
        Expr::mul(vec![Expr::int(-2), p1.clone(), p2.clone(), p12]),
        Expr::mul(vec![sq(&p2), p11]),
    ]);
    let den = Expr::mul(vec![p1.clone(), p2.clone(), Expr::sub(p2, p1)]);
    Ok(Expr::div(num, den))
}

/// J_α = I(f, g_α) − I(f, g₄).
pub fn j_alpha(web: &WebSpec, alpha: usize) -> Result<Expr, InvariantError> {
    let g = web
        .g(alpha)
        .map_err(|_| InvariantError::DegenerateDirection)?;
    Ok(Expr::sub(i_fp(web, g)?, i_fp(web, &web.gs[0])?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvariantName {
    I1,
    I2,
    J(usize),
}

impl fmt::Display for InvariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantName::I1 => f.write_str("I1"),
            InvariantName::I2 => f.write_str("I2"),
            InvariantName::J(a) => write!(f, "J{a}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub name: InvariantName,
    pub expr: Expr,
    pub dag_size: usize,
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
    pub arith: Arith,
    pub reason: Option<String>,
    pub order: Option<DiffOrder>,
    pub elapsed: Duration,
}

impl InvariantReport {
    pub fn run(
        name: InvariantName,
        expr: Expr,
        order: Option<DiffOrder>,
        web: &WebSpec,
        guard: &WebGuard,
        policy: &ZeroTestPolicy,
    ) -> InvariantReport {
        let start = Instant::now();
        let test = zero_test_guarded(&expr, web, guard, policy);
        InvariantReport {
            name,
            dag_size: expr.dag_size(),
            expr,
            verdict: test.verdict,
            evidence: test.evidence,
            arith: test.arith,
            reason: test.reason,
            order,
            elapsed: start.elapsed(),
        }
    }

    /// First sample where the residual did not vanish.
    pub fn witness(&self) -> Option<&Evidence> {
        self.evidence.iter().find(|e| !e.passed())
    }
}

#[derive(Debug, Clone)]
pub struct WebCheck {
    pub verdict: WebVerdict,
    pub reports: Vec<InvariantReport>,
}

pub fn check_4web(
    f: Expr,
    g: Expr,
    domain: Domain,
    policy: &ZeroTestPolicy,
) -> Result<WebCheck, InvariantError> {
    let web = WebSpec::new(f, vec![g])
        .expect("one g gives a 4-web")
        .with_domain(domain);
    check_dweb(&web, policy)
}

/// Theorem-style decision: YES iff I₁, I₂ (for g₄) and every J_α vanish.
pub fn check_dweb(web: &WebSpec, policy: &ZeroTestPolicy) -> Result<WebCheck, InvariantError> {
    let guard = WebGuard::new(web, policy.precision);
    let (i1, i2) = basic_pair(web, &web.gs[0])?;
    let mut jobs = vec![
        (InvariantName::I1, i1.expr, Some(i1.order)),
        (InvariantName::I2, i2.expr, Some(i2.order)),
    ];
    for alpha in 5..=web.d() {
        jobs.push((InvariantName::J(alpha), j_alpha(web, alpha)?, None));
    }
    let reports: Vec<InvariantReport> = jobs
        .into_iter()
        .map(|(name, e, order)| InvariantReport::run(name, e, order, web, &guard, policy))
        .collect();
    Ok(WebCheck {
        verdict: WebVerdict::combine(reports.iter().map(|r| r.verdict)),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::mu_of;
    use crate::calculus::{basic_invariant_of, InvariantFormula};
    use crate::expr::parse;

    fn web(f: &str, gs: &[&str]) -> WebSpec {
        WebSpec::new(
            parse(f).unwrap(),
            gs.iter().map(|g| parse(g).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn trivial_zero_tests() {
        let w = web("x/y", &["x+y"]);
        let p = ZeroTestPolicy::default();
        let t = zero_test(&(Expr::x() - Expr::x()), &w, &p);
        assert_eq!(t.verdict, Verdict::Zero);
        assert_eq!(t.arith, Arith::Exact);
        assert_eq!(t.evidence.len(), 8);
        let t = zero_test(&parse("x*y - 1").unwrap(), &w, &p);
        assert_eq!(t.verdict, Verdict::Nonzero);
        assert_eq!(t.evidence.len(), 1);
    }

    #[test]
    fn float_nonzero_needs_two_witnesses() {
        let w = web("x/y", &["x+y"]);
        let t = zero_test(
            &parse("sqrt(x) - 1").unwrap(),
            &w,
            &ZeroTestPolicy::default(),
        );
        assert_eq!(t.verdict, Verdict::Nonzero);
        assert_eq!(t.evidence.len(), 2);
        assert!(matches!(t.arith, Arith::Float(256)));
    }

    #[test]
    fn singular_domain_is_inconclusive() {
        let w = web("x/y", &["x+y"]).with_domain(Domain::rect((1, 4), (3, 4), (1, 4), (3, 4)));
        let t = zero_test(&parse("1/(x - x)").unwrap(), &w, &ZeroTestPolicy::default());
        assert_eq!(t.verdict, Verdict::Inconclusive);
        assert!(t.reason.unwrap().contains("domain too singular"));
    }

    #[test]
    fn web_parameters_are_drawn_for_parameter_free_expressions() {
        let w = web("x/y", &["x^n + y^n"]);
        let t = zero_test(&(Expr::x() - Expr::y()), &w, &ZeroTestPolicy::default());
        assert_eq!(t.verdict, Verdict::Nonzero);
        assert!(t.evidence[0].point.params.contains_key("n"));
    }

    #[test]
    fn flat_web_has_vanishing_invariants() {
        let w = web("x+y", &["x-y"]);
        let (i1, i2) = basic_pair(&w, &w.gs[0]).unwrap();
        let p = ZeroTestPolicy::default();
        assert_eq!(zero_test(&i1.expr, &w, &p).verdict, Verdict::Zero);
        assert_eq!(zero_test(&i2.expr, &w, &p).verdict, Verdict::Zero);
    }

    #[test]
    fn order_bounds_hold() {
        let w = web("x/y", &["x+y"]);
        let (i1, i2) = basic_pair(&w, &w.gs[0]).unwrap();
        for t in [i1, i2] {
            assert_eq!(t.order.f, Some(4));
            assert_eq!(t.order.a, Some(3));
        }
    }

    #[test]
    fn self_pair_j_vanishes() {
        let w = web("x/y", &["(1-y)/(1-x)", "(1-y)/(1-x)"]);
        assert_eq!(j_alpha(&w, 5).unwrap(), Expr::zero());
    }

    #[test]
    fn degenerate_direction() {
        let w = web("x+y", &["x-y"]);
        assert_eq!(
            i_fp(&w, &parse("x+y").unwrap()),
            Err(InvariantError::DegenerateDirection)
        );
    }

    #[test]
    fn j_matches_mu_difference() {
        // I(f, p) = ν_p − H, so J_α = ν_α − μ with factor exactly one.
        let w = web("y/x", &["(1-y)/(1-x)", "(x-x*y)/(y-x*y)"]);
        let nu = |p: &Expr| mu_of(&basic_invariant_of(&w, p, InvariantFormula::Quotient), &w);
        let diff = Expr::sub(nu(&w.gs[1]), nu(&w.gs[0]));
        let j = j_alpha(&w, 5).unwrap();
        let p = ZeroTestPolicy::default();
        assert_eq!(
            zero_test(&Expr::sub(j, diff), &w, &p).verdict,
            Verdict::Zero
        );
    }

    #[test]
    fn pencil_web_is_linearizable() {
        let c = check_4web(
            parse("x/y").unwrap(),
            parse("x+y").unwrap(),
            Domain::default(),
            &ZeroTestPolicy::default(),
        )
        .unwrap();
        assert_eq!(c.verdict, WebVerdict::Yes);
        assert!(c.reports.iter().all(|r| r.arith == Arith::Exact));
    }
}
