//! Joint integration of λ₁, λ₂ and two parallel coframes along grid lines.
//!
//! The state at a node is [λ₁, λ₂, p¹, q¹, p², q², u, v], where
//! θⁱ = pⁱω₁ + qⁱω₂ with ω₁ = −f_x dx, ω₂ = −f_y dy and du = θ¹, dv = θ².

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::grid::{Grid, ScalarField};
use super::LinearizeError;
use crate::calculus::{d1, d2, mu, web_h, web_k, CurvatureMode, WebSpec};
use crate::expr::{partial, Program, Var};

/// Bound on |λ| beyond which integration is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e12;

pub(crate) const STATE: usize = 8;
pub(crate) type State = [f64; STATE];

/// Symbolic coefficients of the Frobenius system at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Coefficients {
    pub fx: f64,
    pub fy: f64,
    pub h: f64,
    pub k: f64,
    pub mu: f64,
    /// ∂₁μ
    pub mu1: f64,
    /// ∂₂μ
    pub mu2: f64,
}

impl Coefficients {
    fn is_admissible(&self) -> bool {
        let all = [
            self.fx, self.fy, self.h, self.k, self.mu, self.mu1, self.mu2,
        ];
        all.iter().all(|v| v.is_finite()) && self.fx != 0.0 && self.fy != 0.0
    }
}

/// Compiled H, K, μ, ∂ᵢμ and the first derivatives of f, evaluated in
/// double precision.
pub struct CoefficientProgram {
    program: Program,
    params: Vec<f64>,
}

impl CoefficientProgram {
    pub fn new(web: &WebSpec, params: &BTreeMap<String, f64>) -> Result<Self, LinearizeError> {
        let m = mu(web, 4).expect("a d-web has a fourth foliation");
        let roots = [
            partial(&web.f, Var::X),
            partial(&web.f, Var::Y),
            web_h(web),
            web_k(web, CurvatureMode::Log),
            m.clone(),
            d1(&m, web),
            d2(&m, web),
        ];
        let program = Program::compile_many(&roots);
        let params = bind_params(&program, params)?;
        Ok(CoefficientProgram { program, params })
    }

    pub fn at(&self, x: f64, y: f64, scratch: &mut Vec<f64>) -> Coefficients {
        let mut out = [0.0; 7];
        self.program
            .eval_f64_many(x, y, &self.params, scratch, &mut out);
        let [fx, fy, h, k, mu, mu1, mu2] = out;
        Coefficients {
            fx,
            fy,
            h,
            k,
            mu,
            mu1,
            mu2,
        }
    }

    /// Every coefficient sampled at the grid nodes.
    pub fn on_grid(&self, grid: Grid) -> Result<CoefficientFields, LinearizeError> {
        let rows: Vec<Vec<Coefficients>> = (0..grid.ny)
            .into_par_iter()
            .map(|j| {
                let mut scratch = Vec::new();
                (0..grid.nx)
                    .map(|i| self.at(grid.x(i), grid.y(j), &mut scratch))
                    .collect()
            })
            .collect();
        let mut fields = CoefficientFields::zeros(grid);
        for (j, row) in rows.iter().enumerate() {
            for (i, c) in row.iter().enumerate() {
                if !c.is_admissible() {
                    return Err(LinearizeError::Singular {
                        x: grid.x(i),
                        y: grid.y(j),
                    });
                }
                fields.set(i, j, c);
            }
        }
        Ok(fields)
    }
}

pub(crate) fn bind_params(
    program: &Program,
    values: &BTreeMap<String, f64>,
) -> Result<Vec<f64>, LinearizeError> {
    program
        .params()
        .iter()
        .map(|n| {
            values
                .get(n)
                .copied()
                .ok_or_else(|| LinearizeError::MissingParam(n.clone()))
        })
        .collect()
}

/// Grid samples of [`Coefficients`].
#[derive(Debug, Clone)]
pub struct CoefficientFields {
    pub fx: ScalarField,
    pub fy: ScalarField,
    pub h: ScalarField,
    pub k: ScalarField,
    pub mu: ScalarField,
    pub mu1: ScalarField,
    pub mu2: ScalarField,
}

impl CoefficientFields {
    fn zeros(grid: Grid) -> CoefficientFields {
        let z = ScalarField::zeros(grid);
        CoefficientFields {
            fx: z.clone(),
            fy: z.clone(),
            h: z.clone(),
            k: z.clone(),
            mu: z.clone(),
            mu1: z.clone(),
            mu2: z,
        }
    }

    fn set(&mut self, i: usize, j: usize, c: &Coefficients) {
        self.fx.set(i, j, c.fx);
        self.fy.set(i, j, c.fy);
        self.h.set(i, j, c.h);
        self.k.set(i, j, c.k);
        self.mu.set(i, j, c.mu);
        self.mu1.set(i, j, c.mu1);
        self.mu2.set(i, j, c.mu2);
    }

    pub fn at(&self, i: usize, j: usize) -> Coefficients {
        Coefficients {
            fx: self.fx.at(i, j),
            fy: self.fy.at(i, j),
            h: self.h.at(i, j),
            k: self.k.at(i, j),
            mu: self.mu.at(i, j),
            mu1: self.mu1.at(i, j),
            mu2: self.mu2.at(i, j),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    X,
    Y,
}

/// ∂₁ (along `Axis::X`) or ∂₂ of the state, from the resolved system and
/// the parallel-coframe equations.
fn frame_rhs(axis: Axis, c: &Coefficients, s: &State) -> State {
    let [l1, l2, p1, q1, p2, q2, _, _] = *s;
    let (h, k, mu) = (c.h, c.k, c.mu);
    match axis {
        Axis::X => [
            l1 * (h + l1 + mu),
            -k / 3.0 + h * (l2 - mu / 3.0) + l1 * l2 + 2.0 * c.mu1 / 3.0 - c.mu2 / 3.0,
            p1 * (2.0 * l1 + mu + h),
            p1 * l2 + q1 * (l1 + h),
            p2 * (2.0 * l1 + mu + h),
            p2 * l2 + q2 * (l1 + h),
            p1,
            p2,
        ],
        Axis::Y => [
            k / 3.0 + h * (l1 + mu / 3.0) + l1 * l2 + c.mu1 / 3.0 - 2.0 * c.mu2 / 3.0,
            l2 * (h + l2 - mu),
            p1 * (l2 + h) + q1 * l1,
            q1 * (2.0 * l2 - mu + h),
            p2 * (l2 + h) + q2 * l1,
            q2 * (2.0 * l2 - mu + h),
            q1,
            q2,
        ],
    }
}

/// The state's coordinate derivative: ∂/∂x = −f_x∂₁, ∂/∂y = −f_y∂₂.
fn rhs(axis: Axis, c: &Coefficients, s: &State) -> State {
    let scale = match axis {
        Axis::X => -c.fx,
        Axis::Y => -c.fy,
    };
    let mut d = frame_rhs(axis, c, s);
    for v in &mut d {
        *v *= scale;
    }
    d
}

fn axpy(s: &State, h: f64, d: &State) -> State {
    std::array::from_fn(|i| s[i] + h * d[i])
}

/// Steps the state along the x or y axis between two grid nodes with RK4.
pub(crate) struct Stepper<'a> {
    pub coeffs: &'a CoefficientProgram,
    pub substeps: usize,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(coeffs: &'a CoefficientProgram, substeps: usize) -> Stepper<'a> {
        Stepper {
            coeffs,
            substeps: substeps.max(1),
            scratch: Vec::new(),
        }
    }

    fn deriv(&mut self, axis: Axis, x: f64, y: f64, s: &State) -> State {
        let c = self.coeffs.at(x, y, &mut self.scratch);
        rhs(axis, &c, s)
    }

    /// Moves from `from` to `to` along `axis`, holding the other coordinate
    /// at `fixed`.
    pub fn advance(
        &mut self,
        axis: Axis,
        fixed: f64,
        from: f64,
        to: f64,
        mut s: State,
    ) -> Result<State, LinearizeError> {
        let n = self.substeps;
        let h = (to - from) / n as f64;
        let point = |t: f64| match axis {
            Axis::X => (t, fixed),
            Axis::Y => (fixed, t),
        };
        for step in 0..n {
            let t = from + step as f64 * h;
            let (x0, y0) = point(t);
            let (xm, ym) = point(t + h / 2.0);
            let (x1, y1) = point(t + h);
            let k1 = self.deriv(axis, x0, y0, &s);
            let k2 = self.deriv(axis, xm, ym, &axpy(&s, h / 2.0, &k1));
            let k3 = self.deriv(axis, xm, ym, &axpy(&s, h / 2.0, &k2));
            let k4 = self.deriv(axis, x1, y1, &axpy(&s, h, &k3));
            for i in 0..STATE {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if s.iter().any(|v| !v.is_finite())
            || s[0].abs() > DIVERGENCE_BOUND
            || s[1].abs() > DIVERGENCE_BOUND
        {
            return Err(LinearizeError::Diverged);
        }
        Ok(s)
    }

    /// States at every node of one grid line, starting from the known state
    /// at index `start`.
    pub fn sweep(
        &mut self,
        axis: Axis,
        fixed: f64,
        coords: &[f64],
        start: usize,
        s0: State,
    ) -> Result<Vec<State>, LinearizeError> {
        let mut out = vec![[0.0; STATE]; coords.len()];
        out[start] = s0;
        for i in start + 1..coords.len() {
            out[i] = self.advance(axis, fixed, coords[i - 1], coords[i], out[i - 1])?;
        }
        for i in (0..start).rev() {
            out[i] = self.advance(axis, fixed, coords[i + 1], coords[i], out[i + 1])?;
        }
        Ok(out)
    }
}

/// Which axis is swept first from the base.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOrder {
    XThenY,
    YThenX,
}

/// Node states for one path order, indexed like the grid.
pub(crate) fn integrate_paths(
    coeffs: &CoefficientProgram,
    grid: Grid,
    base: (usize, usize),
    s0: State,
    substeps: usize,
    order: PathOrder,
) -> Result<Vec<State>, LinearizeError> {
    let xs = grid.xs();
    let ys = grid.ys();
    let (ib, jb) = base;
    let mut states = vec![[0.0; STATE]; grid.len()];
    match order {
        PathOrder::XThenY => {
            let row = Stepper::new(coeffs, substeps).sweep(Axis::X, ys[jb], &xs, ib, s0)?;
            let columns: Vec<Vec<State>> = row
                .par_iter()
                .enumerate()
                .map(|(i, s)| Stepper::new(coeffs, substeps).sweep(Axis::Y, xs[i], &ys, jb, *s))
                .collect::<Result<_, _>>()?;
            for (i, col) in columns.into_iter().enumerate() {
                for (j, s) in col.into_iter().enumerate() {
                    states[grid.index(i, j)] = s;
                }
            }
        }
        PathOrder::YThenX => {
            let col = Stepper::new(coeffs, substeps).sweep(Axis::Y, xs[ib], &ys, jb, s0)?;
            let rows: Vec<Vec<State>> = col
                .par_iter()
                .enumerate()
                .map(|(j, s)| Stepper::new(coeffs, substeps).sweep(Axis::X, ys[j], &xs, ib, *s))
                .collect::<Result<_, _>>()?;
            for (j, row) in rows.into_iter().enumerate() {
                for (i, s) in row.into_iter().enumerate() {
                    states[grid.index(i, j)] = s;
                }
            }
        }
    }
    Ok(states)
}

/// Initial state at the base: the given λ, and coframes equal to dx, dy.
pub(crate) fn initial_state(c: &Coefficients, lambda0: (f64, f64)) -> State {
    [
        lambda0.0,
        lambda0.1,
        -1.0 / c.fx,
        0.0,
        0.0,
        -1.0 / c.fy,
        0.0,
        0.0,
    ]
}

/// [[∂₁λ₁, ∂₂λ₁], [∂₁λ₂, ∂₂λ₂]] from the resolved system.
pub fn lambda_derivatives(c: &Coefficients, l1: f64, l2: f64) -> [[f64; 2]; 2] {
    let s = [l1, l2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let a = frame_rhs(Axis::X, c, &s);
    let b = frame_rhs(Axis::Y, c, &s);
    [[a[0], b[0]], [a[1], b[1]]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_a_fixed_point_of_the_flat_system() {
        let c = Coefficients {
            fx: 1.0,
            fy: 1.0,
            ..Default::default()
        };
        let d = lambda_derivatives(&c, 0.0, 0.0);
        assert_eq!(d, [[0.0; 2]; 2]);
    }

    #[test]
    fn resolved_system_satisfies_the_curvature_equations() {
        // Plugging the resolved derivatives into the first and fourth
        // curvature coefficients gives zero for arbitrary data.
        let c = Coefficients {
            fx: 0.7,
            fy: -1.3,
            h: 0.4,
            k: -2.1,
            mu: 0.9,
            mu1: 1.7,
            mu2: -0.6,
        };
        let (l1, l2) = (0.35, -1.2);
        let [[d1l1, d2l1], [d1l2, d2l2]] = lambda_derivatives(&c, l1, l2);
        let r1 = 2.0 * d2l1 - d1l2 + c.mu2 - c.h * (2.0 * l1 - l2 + c.mu) - l1 * l2 - c.k;
        let r4 = d2l1 - 2.0 * d1l2 + c.mu1 - c.h * (l1 - 2.0 * l2 + c.mu) + l1 * l2 - c.k;
        let r2 = d2l2 + l2 * (-c.h - l2 + c.mu);
        let r3 = -d1l1 + l1 * (c.h + l1 + c.mu);
        for r in [r1, r2, r3, r4] {
            assert!(r.abs() < 1e-12, "{r}");
        }
    }
}
