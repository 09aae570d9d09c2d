//! The regression corpus: nine published webs with their known verdicts,
//! plus a linear 5-web fixture.
//!
//! Each case keeps the original bracketed notation next to the form
//! accepted by [`crate::expr::parse`], and a sampling rectangle that stays
//! clear of the web's singular lines.

use rug::Rational;

use crate::calculus::{Domain, WebSpec};
use crate::expr::{parse, Expr};
use crate::invariants::WebVerdict;

#[derive(Debug, Clone)]
pub struct CorpusCase {
    pub id: u8,
    pub original: &'static str,
    pub f: &'static str,
    pub gs: &'static [&'static str],
    pub domain: Domain,
    pub expected: WebVerdict,
    /// Linearizable and expected to straighten numerically.
    pub linearizable: bool,
}

impl CorpusCase {
    pub fn web(&self) -> WebSpec {
        let f = parse(self.f).expect("corpus f parses");
        let gs = self
            .gs
            .iter()
            .map(|g| parse(g).expect("corpus g parses"))
            .collect();
        WebSpec::new(f, gs)
            .expect("corpus webs have d >= 4")
            .with_domain(self.domain.clone())
    }

    /// The same web after x ↦ x³ + x, y ↦ exp(y), on the preimage of the
    /// case's rectangle.
    pub fn substituted(&self) -> WebSpec {
        let (p, q) = substitution();
        let web = self.web().reparametrized(&p, &q);
        let domain = preimage_domain(&self.domain);
        web.with_domain(domain)
    }

    pub fn label(&self) -> String {
        format!("Example {}", self.id)
    }
}

/// x³ + x and exp(y).
pub fn substitution() -> (Expr, Expr) {
    (
        parse("x^3 + x").expect("substitution parses"),
        parse("exp(y)").expect("substitution parses"),
    )
}

fn inverse_cubic(v: f64) -> f64 {
    // x³ + x is increasing; Newton from x = v converges.
    let mut x = v;
    for _ in 0..60 {
        x -= (x * x * x + x - v) / (3.0 * x * x + 1.0);
    }
    x
}

fn inward(lo: f64, hi: f64) -> (Rational, Rational) {
    let lo = Rational::from(((lo * 1000.0).ceil() as i64 + 1, 1000));
    let hi = Rational::from(((hi * 1000.0).floor() as i64 - 1, 1000));
    (lo, hi)
}

fn preimage_domain(d: &Domain) -> Domain {
    let [xl, xh, yl, yh] = d.as_f64();
    let x = inward(inverse_cubic(xl), inverse_cubic(xh));
    let y = inward(yl.ln(), yh.ln());
    let mut out = Domain::new(x, y).expect("preimage of a rectangle is a rectangle");
    out.params = d.params.clone();
    out
}

fn q(n: i64, d: i64) -> (i64, i64) {
    (n, d)
}

/// Away from x = y, x = 1 and y = 1.
fn off_diagonal() -> Domain {
    Domain::rect(q(11, 20), q(17, 20), q(3, 20), q(9, 20))
}

pub fn cases() -> Vec<CorpusCase> {
    use WebVerdict::{No, Yes};
    vec![
        CorpusCase {
            id: 1,
            original: "LinTest4Web[x/y, x+y]",
            f: "x/y",
            gs: &["x+y"],
            domain: Domain::default(),
            expected: Yes,
            linearizable: true,
        },
        CorpusCase {
            id: 2,
            original: "LinTest4Web[x/y, (1-y)/(1-x)]",
            f: "x/y",
            gs: &["(1-y)/(1-x)"],
            domain: off_diagonal(),
            expected: Yes,
            linearizable: true,
        },
        CorpusCase {
            id: 3,
            original: "LinTest4Web[x+Sqrt[x^2-y], x+y]",
            f: "x + sqrt(x^2 - y)",
            gs: &["x+y"],
            domain: Domain::rect(q(3, 2), q(5, 2), q(1, 4), q(1, 1)),
            expected: Yes,
            linearizable: true,
        },
        CorpusCase {
            id: 4,
            original: "LinTest4Web[x+Sqrt[x^2-y], y+Sqrt[y^2-x]]",
            f: "x + sqrt(x^2 - y)",
            gs: &["y + sqrt(y^2 - x)"],
            domain: Domain::rect(q(2, 1), q(3, 1), q(2, 1), q(3, 1)),
            expected: Yes,
            linearizable: true,
        },
        CorpusCase {
            id: 5,
            original: "LinTest4Web[x/y, (x+y)*Exp[-x]]",
            f: "x/y",
            gs: &["(x+y)*exp(-x)"],
            domain: Domain::rect(q(1, 10), q(9, 20), q(1, 10), q(9, 20)),
            expected: No,
            linearizable: false,
        },
        CorpusCase {
            id: 6,
            original: "LinTest4Web[x/y, x^n+y^n]",
            f: "x/y",
            gs: &["x^n + y^n"],
            domain: Domain::default(),
            expected: Yes,
            linearizable: true,
        },
        CorpusCase {
            id: 7,
            original: "LinTestdWeb[{y/x, (1-y)/(1-x), (x-xy)/(y-xy)}]",
            f: "y/x",
            gs: &["(1-y)/(1-x)", "(x-x*y)/(y-x*y)"],
            domain: off_diagonal(),
            expected: No,
            linearizable: false,
        },
        CorpusCase {
            id: 8,
            original: "LinTest4Web[y/x, (x-xy)/(y-xy)]",
            f: "y/x",
            gs: &["(x-x*y)/(y-x*y)"],
            domain: off_diagonal(),
            expected: Yes,
            linearizable: true,
        },
        CorpusCase {
            id: 9,
            original: "LinTestdWeb[{x/y, (1-y)/(1-x), (x-xy)/(y-xy), xy, (x-xy)/(x-1), \
                       (1-y)/(xy-y), x(1-y)^2/y(1-x)^2}]",
            f: "x/y",
            gs: &[
                "(1-y)/(1-x)",
                "(x-x*y)/(y-x*y)",
                "x*y",
                "(x-x*y)/(x-1)",
                "(1-y)/(x*y-y)",
                "x*(1-y)^2/(y*(1-x)^2)",
            ],
            domain: off_diagonal(),
            expected: No,
            linearizable: false,
        },
    ]
}

pub fn case(id: u8) -> Option<CorpusCase> {
    cases().into_iter().find(|c| c.id == id)
}

/// Linear 5-web: a pencil through the origin and two parallel families.
pub fn linear_five_web() -> WebSpec {
    WebSpec::new(
        parse("x/y").expect("parses"),
        vec![
            parse("x+y").expect("parses"),
            parse("2*x+y").expect("parses"),
        ],
    )
    .expect("5-web")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_parses() {
        let cs = cases();
        assert_eq!(cs.len(), 9);
        assert_eq!(cs[8].web().d(), 9);
        assert_eq!(cs[6].web().d(), 5);
        assert_eq!(linear_five_web().d(), 5);
    }

    #[test]
    fn preimage_maps_inside() {
        for c in cases() {
            let d = preimage_domain(&c.domain);
            let [xl, xh, yl, yh] = d.as_f64();
            let [oxl, oxh, oyl, oyh] = c.domain.as_f64();
            for (x, y) in [(xl, yl), (xh, yh)] {
                let px = x * x * x + x;
                let qy = y.exp();
                assert!(px > oxl && px < oxh, "case {}", c.id);
                assert!(qy > oyl && qy < oyh, "case {}", c.id);
            }
        }
    }
}
