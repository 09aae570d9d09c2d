//! Numerical linearization of a linearizable web.
//!
//! The pipeline integrates λ₁, λ₂ from a base point, assembles the flat
//! connection, checks its curvature, builds flat coordinates (u, v) from two
//! parallel coframes and measures how straight every foliation becomes in
//! those coordinates.

pub mod frobenius;
pub mod grid;
pub mod straight;
pub mod svg;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::calculus::WebSpec;
use crate::invariants::{check_dweb, InvariantError, WebCheck, WebVerdict, ZeroTestPolicy};
use frobenius::{
    initial_state, integrate_paths, CoefficientFields, CoefficientProgram, PathOrder, State,
};
pub use grid::{Grid, ScalarField};
pub use straight::{straightness_report, FoliationStraightness, LeafTrace, StraightnessReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearizeError {
    #[error("web is not linearizable (verdict {0}); pass --force to run anyway")]
    Refused(WebVerdict),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error("Frobenius integration diverged; shrink grid")]
    Diverged,
    #[error("web is singular at grid node ({x}, {y})")]
    Singular { x: f64, y: f64 },
    #[error("parameter {0} needs a value (--param {0}=VALUE)")]
    MissingParam(String),
    #[error("base point ({0}, {1}) lies outside the grid")]
    BaseOutside(f64, f64),
    #[error("connection is not flat: residual {residual:e} exceeds {threshold:e}")]
    NotFlat { residual: f64, threshold: f64 },
    #[error("parallel coframe is not closed: curl {residual:e} exceeds {threshold:e}")]
    NotClosed { residual: f64, threshold: f64 },
    #[error("coordinate map singular on grid")]
    CoordinateSingular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizeOptions {
    /// Nodes per side.
    pub grid: usize,
    /// Defaults to the centre of the domain; snapped to the nearest node.
    pub base: Option<(f64, f64)>,
    pub lambda0: (f64, f64),
    /// RK4 substeps between neighbouring nodes.
    pub substeps: usize,
    pub leaves: usize,
    pub params: BTreeMap<String, f64>,
    /// Skip the verdict, flatness and closedness preconditions.
    pub force: bool,
}

impl Default for LinearizeOptions {
    fn default() -> Self {
        LinearizeOptions {
            grid: 41,
            base: None,
            lambda0: (0.0, 0.0),
            substeps: 4,
            leaves: 9,
            params: BTreeMap::new(),
            force: false,
        }
    }
}

/// λ and the parallel coframes on a grid, integrated x-then-y from the base.
#[derive(Debug, Clone)]
pub struct FrobeniusSolution {
    pub grid: Grid,
    pub base: (usize, usize),
    pub lambda0: (f64, f64),
    pub lambda1: ScalarField,
    pub lambda2: ScalarField,
    /// p¹, q¹, p², q².
    pub coframe: [ScalarField; 4],
    pub u: ScalarField,
    pub v: ScalarField,
    /// Max over nodes of |λ(x then y) − λ(y then x)|.
    pub path_discrepancy: f64,
    pub coefficients: CoefficientFields,
}

impl FrobeniusSolution {
    pub fn base_point(&self) -> (f64, f64) {
        (self.grid.x(self.base.0), self.grid.y(self.base.1))
    }
}

fn unpack(grid: Grid, states: &[State], k: usize) -> ScalarField {
    ScalarField {
        grid,
        values: states.iter().map(|s| s[k]).collect(),
    }
}

/// Integrates λ₁, λ₂ (together with the coframe system) along both path
/// orders and reports their disagreement. Does not check the verdict.
pub fn integrate_lambda(
    web: &WebSpec,
    opts: &LinearizeOptions,
) -> Result<FrobeniusSolution, LinearizeError> {
    let coeffs = CoefficientProgram::new(web, &opts.params)?;
    let grid = Grid::new(web.domain.as_f64(), opts.grid, opts.grid);
    let coefficients = coeffs.on_grid(grid)?;
    let (bx, by) = opts
        .base
        .unwrap_or(((grid.x0 + grid.x1) / 2.0, (grid.y0 + grid.y1) / 2.0));
    if !(grid.x0..=grid.x1).contains(&bx) || !(grid.y0..=grid.y1).contains(&by) {
        return Err(LinearizeError::BaseOutside(bx, by));
    }
    let base = grid.nearest(bx, by);
    let s0 = initial_state(&coefficients.at(base.0, base.1), opts.lambda0);
    let (a, b) = rayon::join(
        || integrate_paths(&coeffs, grid, base, s0, opts.substeps, PathOrder::XThenY),
        || integrate_paths(&coeffs, grid, base, s0, opts.substeps, PathOrder::YThenX),
    );
    let (a, b) = (a?, b?);
    let path_discrepancy = a
        .iter()
        .zip(&b)
        .map(|(s, t)| (s[0] - t[0]).abs().max((s[1] - t[1]).abs()))
        .fold(0.0, f64::max);
    Ok(FrobeniusSolution {
        grid,
        base,
        lambda0: opts.lambda0,
        lambda1: unpack(grid, &a, 0),
        lambda2: unpack(grid, &a, 1),
        coframe: std::array::from_fn(|k| unpack(grid, &a, 2 + k)),
        u: unpack(grid, &a, 6),
        v: unpack(grid, &a, 7),
        path_discrepancy,
        coefficients,
    })
}

/// A 1-form c₁ω₁ + c₂ω₂ at every node.
#[derive(Debug, Clone)]
pub struct FormField {
    pub c1: ScalarField,
    pub c2: ScalarField,
}

/// ∇ᵢωⱼ at every node, stored as `nabla[i][j]`.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub grid: Grid,
    pub lambda1: ScalarField,
    pub lambda2: ScalarField,
    pub nabla: [[FormField; 2]; 2],
}

/// Deformation tensor components at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deformation {
    pub t1_11: f64,
    pub t1_12: f64,
    pub t1_21: f64,
    pub t2_12: f64,
    pub t2_21: f64,
    pub t2_22: f64,
}

impl Deformation {
    /// T₁₁¹ + T₂₂² − 2(T₁₂¹ + T₁₂²).
    pub fn geodesy_residual(&self) -> f64 {
        self.t1_11 + self.t2_22 - 2.0 * (self.t1_12 + self.t2_12)
    }
}

impl ConnectionField {
    pub fn deformation(&self, i: usize, j: usize, mu: f64) -> Deformation {
        let (l1, l2) = (self.lambda1.at(i, j), self.lambda2.at(i, j));
        Deformation {
            t1_11: 2.0 * l1 + mu,
            t1_12: l2,
            t1_21: l2,
            t2_12: l1,
            t2_21: l1,
            t2_22: 2.0 * l2 - mu,
        }
    }
}

pub fn build_connection(
    lambda1: &ScalarField,
    lambda2: &ScalarField,
    coeffs: &CoefficientFields,
) -> ConnectionField {
    let grid = lambda1.grid;
    let zero = ScalarField::zeros(grid);
    let mut nabla: [[FormField; 2]; 2] = std::array::from_fn(|_| {
        std::array::from_fn(|_| FormField {
            c1: zero.clone(),
            c2: zero.clone(),
        })
    });
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (l1, l2) = (lambda1.at(i, j), lambda2.at(i, j));
            let (h, mu) = (coeffs.h.at(i, j), coeffs.mu.at(i, j));
            let entries = [
                [(-(2.0 * l1 + mu + h), -l2), (0.0, -(l1 + h))],
                [(-(l2 + h), 0.0), (-l1, -(2.0 * l2 - mu + h))],
            ];
            for (a, row) in entries.iter().enumerate() {
                for (b, &(c1, c2)) in row.iter().enumerate() {
                    nabla[a][b].c1.set(i, j, c1);
                    nabla[a][b].c2.set(i, j, c2);
                }
            }
        }
    }
    ConnectionField {
        grid,
        lambda1: lambda1.clone(),
        lambda2: lambda2.clone(),
        nabla,
    }
}

/// Max over the grid of the four curvature coefficients of the deformed
/// connection. λ derivatives are taken by fourth-order differences; H, K, μ
/// and ∂ᵢμ come from the symbolic coefficients.
pub fn flatness_residual(conn: &ConnectionField, coeffs: &CoefficientFields) -> f64 {
    let l1 = &conn.lambda1;
    let l2 = &conn.lambda2;
    let (l1x, l1y, l2x, l2y) = (l1.dx(), l1.dy(), l2.dx(), l2.dy());
    let g = conn.grid;
    let mut worst: f64 = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = coeffs.at(i, j);
            let (a, b) = (l1.at(i, j), l2.at(i, j));
            let d1a = -l1x.at(i, j) / c.fx;
            let d2a = -l1y.at(i, j) / c.fy;
            let d1b = -l2x.at(i, j) / c.fx;
            let d2b = -l2y.at(i, j) / c.fy;
            let (h, k, mu) = (c.h, c.k, c.mu);
            let r = [
                2.0 * d2a - d1b + c.mu2 - h * (2.0 * a - b + mu) - a * b - k,
                d2b + b * (-h - b + mu),
                -d1a + a * (h + a + mu),
                d2a - 2.0 * d1b + c.mu1 - h * (a - 2.0 * b + mu) + a * b - k,
            ];
            for v in r {
                worst = if v.is_finite() {
                    worst.max(v.abs())
                } else {
                    f64::INFINITY
                };
            }
        }
    }
    worst
}

/// Default acceptance bound for flatness and closedness.
pub fn flatness_threshold(grid: &Grid) -> f64 {
    1e-4 * grid.diameter()
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearizationResult {
    pub grid: Grid,
    pub base: (f64, f64),
    pub lambda0: (f64, f64),
    #[serde(skip)]
    pub u: ScalarField,
    #[serde(skip)]
    pub v: ScalarField,
    /// u_x, u_y, v_x, v_y.
    #[serde(skip)]
    pub gradient: [ScalarField; 4],
    pub flatness_residual: f64,
    pub path_independence_residual: f64,
    /// Max finite-difference curl of θ¹, θ².
    pub closedness_residual: f64,
    /// Smallest |det ∂(u, v)/∂(x, y)| over the grid.
    pub min_jacobian: f64,
    pub straightness: Vec<FoliationStraightness>,
}

impl LinearizationResult {
    pub fn max_straightness(&self) -> f64 {
        self.straightness
            .iter()
            .map(|s| s.residual)
            .fold(0.0, f64::max)
    }
}

/// The gradient of u and v, (u_x, u_y, v_x, v_y), at every node.
fn coframe_components(sol: &FrobeniusSolution) -> [ScalarField; 4] {
    let c = &sol.coefficients;
    let [p1, q1, p2, q2] = &sol.coframe;
    let mul = |a: &ScalarField, s: &ScalarField| ScalarField {
        grid: a.grid,
        values: a
            .values
            .iter()
            .zip(&s.values)
            .map(|(x, y)| -x * y)
            .collect(),
    };
    [
        mul(p1, &c.fx),
        mul(q1, &c.fy),
        mul(p2, &c.fx),
        mul(q2, &c.fy),
    ]
}

/// Flat coordinates from the parallel coframes. Checks closedness of each
/// coframe and nondegeneracy of the coordinate map. Straightness is left
/// empty; see [`straightness_report`].
pub fn flat_coordinates(
    sol: &FrobeniusSolution,
    flatness: f64,
    force: bool,
) -> Result<LinearizationResult, LinearizeError> {
    let threshold = flatness_threshold(&sol.grid);
    if !force && !(flatness <= threshold) {
        return Err(LinearizeError::NotFlat {
            residual: flatness,
            threshold,
        });
    }
    let gradient = coframe_components(sol);
    let [ux, uy, vx, vy] = &gradient;
    let curl = |ax: &ScalarField, ay: &ScalarField| {
        let (dyx, dxy) = (ax.dy(), ay.dx());
        dyx.values
            .iter()
            .zip(&dxy.values)
            .map(|(a, b)| (b - a).abs())
            .fold(0.0, f64::max)
    };
    let closedness = curl(ux, uy).max(curl(vx, vy));
    if !force && !(closedness <= threshold) {
        return Err(LinearizeError::NotClosed {
            residual: closedness,
            threshold,
        });
    }
    let min_jacobian = (0..sol.grid.len())
        .map(|k| (ux.values[k] * vy.values[k] - uy.values[k] * vx.values[k]).abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_jacobian >= 1e-8) {
        return Err(LinearizeError::CoordinateSingular);
    }
    Ok(LinearizationResult {
        grid: sol.grid,
        base: sol.base_point(),
        lambda0: sol.lambda0,
        u: sol.u.clone(),
        v: sol.v.clone(),
        gradient: gradient.clone(),
        flatness_residual: flatness,
        path_independence_residual: sol.path_discrepancy,
        closedness_residual: closedness,
        min_jacobian,
        straightness: Vec::new(),
    })
}

/// Everything produced by [`linearize`].
#[derive(Debug, Clone)]
pub struct Linearization {
    /// The linearizability check, unless skipped by `force`.
    pub check: Option<WebCheck>,
    pub solution: FrobeniusSolution,
    pub connection: ConnectionField,
    pub result: LinearizationResult,
    pub leaves: Vec<LeafTrace>,
}

/// Runs the full pipeline. Unless `opts.force` is set, the web must first
/// test linearizable.
pub fn linearize(
    web: &WebSpec,
    opts: &LinearizeOptions,
    policy: &ZeroTestPolicy,
) -> Result<Linearization, LinearizeError> {
    let check = if opts.force {
        None
    } else {
        let check = check_dweb(web, policy)?;
        if check.verdict != WebVerdict::Yes {
            return Err(LinearizeError::Refused(check.verdict));
        }
        Some(check)
    };
    let solution = integrate_lambda(web, opts)?;
    let connection = build_connection(&solution.lambda1, &solution.lambda2, &solution.coefficients);
    let flatness = flatness_residual(&connection, &solution.coefficients);
    let mut result = flat_coordinates(&solution, flatness, opts.force)?;
    let report = straightness_report(&result, web, opts.leaves, &opts.params)?;
    result.straightness = report.foliations;
    Ok(Linearization {
        check,
        solution,
        connection,
        result,
        leaves: report.leaves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Domain;
    use crate::corpus::case;
    use crate::expr::parse;

    fn web(f: &str, g: &str) -> WebSpec {
        WebSpec::new(parse(f).unwrap(), vec![parse(g).unwrap()]).unwrap()
    }

    fn forced() -> LinearizeOptions {
        LinearizeOptions {
            force: true,
            ..Default::default()
        }
    }

    #[test]
    fn zero_gauge_is_trivial() {
        let w = web("x+y", "x-y").with_domain(Domain::default());
        let sol = integrate_lambda(&w, &LinearizeOptions::default()).unwrap();
        assert_eq!(sol.lambda1.max_abs(), 0.0);
        assert_eq!(sol.lambda2.max_abs(), 0.0);
        let conn = build_connection(&sol.lambda1, &sol.lambda2, &sol.coefficients);
        for row in &conn.nabla {
            for form in row {
                assert_eq!(form.c1.max_abs(), 0.0);
                assert_eq!(form.c2.max_abs(), 0.0);
            }
        }
        assert_eq!(flatness_residual(&conn, &sol.coefficients), 0.0);
        let (x0, y0) = sol.base_point();
        let g = sol.grid;
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert!((sol.u.at(i, j) - (g.x(i) - x0)).abs() < 1e-14);
                assert!((sol.v.at(i, j) - (g.y(j) - y0)).abs() < 1e-14);
            }
        }
        let lin = linearize(&w, &LinearizeOptions::default(), &ZeroTestPolicy::default()).unwrap();
        assert!(
            lin.result.max_straightness() < 1e-12,
            "{:?}",
            lin.result.straightness
        );
    }

    #[test]
    fn deformation_tensor_shape() {
        let w = case(1).unwrap().web();
        let opts = LinearizeOptions {
            grid: 11,
            lambda0: (0.3, -0.7),
            ..Default::default()
        };
        let sol = integrate_lambda(&w, &opts).unwrap();
        let conn = build_connection(&sol.lambda1, &sol.lambda2, &sol.coefficients);
        for j in 0..11 {
            for i in 0..11 {
                let t = conn.deformation(i, j, sol.coefficients.mu.at(i, j));
                assert_eq!(t.t1_12, t.t1_21);
                assert_eq!(t.t2_12, t.t2_21);
                assert!(t.geodesy_residual().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn example_one_is_path_independent_and_flat() {
        let w = case(1).unwrap().web();
        let sol = integrate_lambda(&w, &LinearizeOptions::default()).unwrap();
        assert!(sol.path_discrepancy < 1e-8, "{}", sol.path_discrepancy);
        let conn = build_connection(&sol.lambda1, &sol.lambda2, &sol.coefficients);
        let r = flatness_residual(&conn, &sol.coefficients);
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn perturbing_lambda_breaks_flatness() {
        let w = case(1).unwrap().web();
        let sol = integrate_lambda(&w, &LinearizeOptions::default()).unwrap();
        let mut l1 = sol.lambda1.clone();
        l1.set(20, 20, l1.at(20, 20) + 0.1);
        let conn = build_connection(&l1, &sol.lambda2, &sol.coefficients);
        assert!(flatness_residual(&conn, &sol.coefficients) > 1e-3);
    }

    #[test]
    fn non_linearizable_web_is_refused() {
        let w = case(5).unwrap().web();
        let err =
            linearize(&w, &LinearizeOptions::default(), &ZeroTestPolicy::default()).unwrap_err();
        assert_eq!(err, LinearizeError::Refused(WebVerdict::No));
    }

    #[test]
    fn missing_parameter_is_reported() {
        let w = case(6).unwrap().web();
        let err = integrate_lambda(&w, &forced()).unwrap_err();
        assert_eq!(err, LinearizeError::MissingParam("n".into()));
    }

    #[test]
    fn base_outside_is_rejected() {
        let w = case(1).unwrap().web();
        let opts = LinearizeOptions {
            base: Some((5.0, 0.5)),
            ..Default::default()
        };
        assert!(matches!(
            integrate_lambda(&w, &opts),
            Err(LinearizeError::BaseOutside(..))
        ));
    }
}
