//! Weighted covariant derivatives δᵢ⁽ᵏ⁾u = ∂ᵢu − kHu with respect to the
//! Chern connection, prolongations of the basic invariant, and the
//! closed-form curvature conditions K₁ = R₁, K₂ = R₂.

use std::sync::LazyLock;

use rug::Rational;

use crate::calculus::{basic_invariant, d1, d2, web_h, web_k, CurvatureMode, WebError, WebSpec};
use crate::expr::{parse, Expr};

/// A scalar of a given weight. δ raises the weight by one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedScalar {
    pub expr: Expr,
    pub weight: u32,
}

impl WeightedScalar {
    pub fn new(expr: Expr, weight: u32) -> WeightedScalar {
        WeightedScalar { expr, weight }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    One,
    Two,
}

pub fn delta(u: &WeightedScalar, i: Dir, web: &WebSpec) -> WeightedScalar {
    let d = match i {
        Dir::One => d1(&u.expr, web),
        Dir::Two => d2(&u.expr, web),
    };
    let k = u.weight;
    let expr = if k == 0 {
        d
    } else {
        let khu = Expr::mul(vec![Expr::int(k as i64), web_h(web), u.expr.clone()]);
        Expr::sub(d, khu)
    };
    WeightedScalar {
        expr,
        weight: k + 1,
    }
}

/// δ₂⁽ˢ⁺¹⁾δ₁⁽ˢ⁾u − δ₁⁽ˢ⁺¹⁾δ₂⁽ˢ⁾u − sKu, which vanishes identically.
pub fn commutator_residual(u: &WeightedScalar, web: &WebSpec) -> Expr {
    let s = u.weight as i64;
    let lhs = delta(&delta(u, Dir::One, web), Dir::Two, web);
    let rhs = delta(&delta(u, Dir::Two, web), Dir::One, web);
    let sku = Expr::mul(vec![
        Expr::int(s),
        web_k(web, CurvatureMode::Structure),
        u.expr.clone(),
    ]);
    Expr::sub(Expr::sub(lhs.expr, rhs.expr), sku)
}

/// Covariant derivatives of the basic invariant up to order three.
/// `tNNN` are the unsymmetrized δ_k δ_j δ_i a; `aNNN` the symmetrized ones.
#[derive(Debug, Clone)]
pub struct Prolongation {
    pub a: Expr,
    pub a1: Expr,
    pub a2: Expr,
    pub a11: Expr,
    pub a12: Expr,
    pub a21: Expr,
    pub a22: Expr,
    pub a111: Expr,
    pub a112: Expr,
    pub a122: Expr,
    pub a222: Expr,
    pub t112: Expr,
    pub t121: Expr,
    pub t211: Expr,
    pub t122: Expr,
    pub t212: Expr,
    pub t221: Expr,
}

pub fn prolong(a: &Expr, web: &WebSpec) -> Prolongation {
    let w0 = WeightedScalar::new(a.clone(), 0);
    let d = |u: &WeightedScalar, i| delta(u, i, web);
    let (one, two) = (Dir::One, Dir::Two);
    let a1 = d(&w0, one);
    let a2 = d(&w0, two);
    let a11 = d(&a1, one);
    let a12 = d(&a1, two);
    let a21 = d(&a2, one);
    let a22 = d(&a2, two);
    // ã_ijk = δ_k δ_j δ_i a
    let t111 = d(&a11, one).expr;
    let t112 = d(&a11, two).expr;
    let t121 = d(&a12, one).expr;
    let t211 = d(&a21, one).expr;
    let t122 = d(&a12, two).expr;
    let t212 = d(&a21, two).expr;
    let t221 = d(&a22, one).expr;
    let t222 = d(&a22, two).expr;
    let third = |x: &Expr, y: &Expr, z: &Expr| {
        Expr::mul(vec![
            Expr::ratio(1, 3),
            Expr::add(vec![x.clone(), y.clone(), z.clone()]),
        ])
    };
    Prolongation {
        a: a.clone(),
        a112: third(&t112, &t121, &t211),
        a122: third(&t122, &t212, &t221),
        a111: t111,
        a222: t222,
        a1: a1.expr,
        a2: a2.expr,
        a11: a11.expr,
        a12: a12.expr,
        a21: a21.expr,
        a22: a22.expr,
        t112,
        t121,
        t211,
        t122,
        t212,
        t221,
    }
}

pub fn prolong_a(web: &WebSpec, alpha: usize) -> Result<Prolongation, WebError> {
    Ok(prolong(&basic_invariant(web, alpha)?, web))
}

/// K₁ = δ₁⁽²⁾K = ∂₁K − 2HK.
pub fn k1(web: &WebSpec) -> Expr {
    curvature_derivative(web, Dir::One)
}

/// K₂ = δ₂⁽²⁾K = ∂₂K − 2HK.
pub fn k2(web: &WebSpec) -> Expr {
    curvature_derivative(web, Dir::Two)
}

fn curvature_derivative(web: &WebSpec, i: Dir) -> Expr {
    let k = WeightedScalar::new(web_k(web, CurvatureMode::Structure), 2);
    delta(&k, i, web).expr
}

// Right-hand sides over the symbols a, a1, a2, a11, a12, a22, a111, a112,
// a122, a222 and k (the curvature), grouped by powers of 1/(a - a^2).
const R1: &str = "1/(a - a^2)*(1/3*((1 - a)*a1 + a*a2)*k - a111 + (2 + a)*a112 - 2*a*a122) \
    + 1/(a - a^2)^2*(((4 - 6*a)*a1 + (a^2 + 3*a - 2)*a2)*a11 \
        + ((2*a^2 + 7*a - 6)*a1 + (2*a - 3*a^2)*a2)*a12 \
        + (2*(a - a^2)*a1 - 2*a^2*a2)*a22) \
    + 1/(a - a^2)^3*((-6*a^2 + 8*a - 3)*a1^3 - 2*a^3*a2^3 \
        + (2*a^3 + 9*a^2 - 15*a + 6)*a1^2*a2 + (-3*a^3 + 6*a^2 - 2*a)*a1*a2^2)";

const R2: &str = "1/(a - a^2)*(1/3*(a1 + (a - 1)*a2)*k + 2*a112 - (2*a + 1)*a122 + a*a222) \
    + 1/(a - a^2)^2*((2*a1 + (2*a - 2)*a2)*a11 \
        + ((6*a - 5)*a1 + (-2*a^2 - 3*a + 2)*a2)*a12 \
        + ((1 - a - 2*a^2)*a1 + 2*a^2*a2)*a22) \
    + 1/(a - a^2)^3*((4*a - 2)*a1^3 + a^3*a2^3 \
        + (6*a^2 - 12*a + 5)*a1^2*a2 + (-2*a^3 - 3*a^2 + 5*a - 2)*a1*a2^2)";

static TEMPLATES: LazyLock<(Expr, Expr)> = LazyLock::new(|| {
    (
        parse(R1).expect("R1 template parses"),
        parse(R2).expect("R2 template parses"),
    )
});

fn instantiate(template: &Expr, p: &Prolongation, k: &Expr) -> Expr {
    let sym = |n: &str, e: &Expr| (Expr::param(n), e.clone());
    template.substitute(&[
        sym("a", &p.a),
        sym("a1", &p.a1),
        sym("a2", &p.a2),
        sym("a11", &p.a11),
        sym("a12", &p.a12),
        sym("a22", &p.a22),
        sym("a111", &p.a111),
        sym("a112", &p.a112),
        sym("a122", &p.a122),
        sym("a222", &p.a222),
        sym("k", k),
    ])
}

/// (R₁, R₂) evaluated on the prolongation of `a`.
pub fn closed_rhs(p: &Prolongation, web: &WebSpec) -> (Expr, Expr) {
    let k = web_k(web, CurvatureMode::Structure);
    let (t1, t2) = &*TEMPLATES;
    (instantiate(t1, p, &k), instantiate(t2, p, &k))
}

pub fn k1_closed_residual(web: &WebSpec, alpha: usize) -> Result<Expr, WebError> {
    let p = prolong_a(web, alpha)?;
    Ok(Expr::sub(k1(web), closed_rhs(&p, web).0))
}

pub fn k2_closed_residual(web: &WebSpec, alpha: usize) -> Result<Expr, WebError> {
    let p = prolong_a(web, alpha)?;
    Ok(Expr::sub(k2(web), closed_rhs(&p, web).1))
}

/// Symmetrization identities between ã and a, as residual expressions:
/// ã112 − a112 − 2Ka1/3, ã121 − a112 + Ka1/3, ã221 − a122 + 2Ka2/3,
/// ã122 − a122 − Ka2/3.
pub fn symmetrization_residuals(p: &Prolongation, web: &WebSpec) -> [Expr; 4] {
    let k = web_k(web, CurvatureMode::Structure);
    let c = |n: i64, u: &Expr| {
        Expr::mul(vec![
            Expr::constant(Rational::from((n, 3))),
            k.clone(),
            u.clone(),
        ])
    };
    let r = |t: &Expr, a: &Expr, corr: Expr| Expr::sub(Expr::sub(t.clone(), a.clone()), corr);
    [
        r(&p.t112, &p.a112, c(2, &p.a1)),
        r(&p.t121, &p.a112, c(-1, &p.a1)),
        r(&p.t221, &p.a122, c(-2, &p.a2)),
        r(&p.t122, &p.a122, c(1, &p.a2)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::WebSpec;
    use crate::invariants::{zero_test, Verdict, ZeroTestPolicy};

    fn web(f: &str, g: &str) -> WebSpec {
        WebSpec::new(parse(f).unwrap(), vec![parse(g).unwrap()]).unwrap()
    }

    fn assert_zero(e: &Expr, w: &WebSpec) {
        let t = zero_test(e, w, &ZeroTestPolicy::default());
        assert_eq!(
            t.verdict,
            Verdict::Zero,
            "{:?}",
            t.evidence.last().map(|e| e.residual.to_f64())
        );
    }

    #[test]
    fn weight_zero_delta_is_frame_derivative() {
        let w = web("x/y", "x+y");
        let u = WeightedScalar::new(parse("x*y").unwrap(), 0);
        let d = delta(&u, Dir::One, &w);
        assert_eq!(d.expr, d1(&u.expr, &w));
        assert_eq!(d.weight, 1);
    }

    #[test]
    fn flat_web_delta_is_plain() {
        let w = web("x+y", "x-y");
        let u = WeightedScalar::new(parse("x^2").unwrap(), 3);
        assert_eq!(delta(&u, Dir::Two, &w).expr, d2(&u.expr, &w));
    }

    #[test]
    fn commutator_identity() {
        let w = web("x/y", "(1-y)/(1-x)").with_domain(crate::calculus::Domain::rect(
            (11, 20),
            (17, 20),
            (3, 20),
            (9, 20),
        ));
        let p = prolong_a(&w, 4).unwrap();
        for (e, s) in [
            (p.a.clone(), 0),
            (p.a1.clone(), 1),
            (web_k(&w, CurvatureMode::Structure), 2),
        ] {
            assert_zero(&commutator_residual(&WeightedScalar::new(e, s), &w), &w);
        }
    }

    #[test]
    fn prolongation_identities() {
        let w = web("x + sqrt(x^2 - y)", "x+y").with_domain(crate::calculus::Domain::rect(
            (3, 2),
            (5, 2),
            (1, 4),
            (1, 1),
        ));
        let p = prolong_a(&w, 4).unwrap();
        assert_zero(&Expr::sub(p.a12.clone(), p.a21.clone()), &w);
        for r in symmetrization_residuals(&p, &w) {
            assert_zero(&r, &w);
        }
        // a11 = ∂₁²a − H∂₁a
        let h = web_h(&w);
        let expanded = Expr::sub(d1(&d1(&p.a, &w), &w), Expr::mul(vec![h, d1(&p.a, &w)]));
        assert_zero(&Expr::sub(p.a11.clone(), expanded), &w);
    }

    #[test]
    fn constant_invariant_has_trivial_prolongation() {
        let w = web("x+y", "x-y");
        let p = prolong_a(&w, 4).unwrap();
        for e in [
            &p.a1, &p.a2, &p.a11, &p.a22, &p.a111, &p.a112, &p.a122, &p.a222,
        ] {
            assert_eq!(crate::expr::simplify(e), Expr::zero());
        }
    }

    #[test]
    fn closed_form_on_pencil_web() {
        let w = web("x/y", "x+y");
        assert_zero(&k1_closed_residual(&w, 4).unwrap(), &w);
        assert_zero(&k2_closed_residual(&w, 4).unwrap(), &w);
    }
}
