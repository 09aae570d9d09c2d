//! Tracing leaves through the grid and measuring their straightness in the
//! flat coordinates.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::frobenius::bind_params;
use super::grid::ScalarField;
use super::{LinearizationResult, LinearizeError};
use crate::calculus::WebSpec;
use crate::expr::{Expr, Program};

/// Straightness of one foliation: the worst leaf's largest perpendicular
/// distance from its fitted line, divided by the leaf's extent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoliationStraightness {
    pub name: String,
    pub residual: f64,
    pub leaves: usize,
    /// Leaves with too few grid crossings to fit.
    pub skipped: usize,
}

/// Points of one leaf in the original and in the flat coordinates, ordered
/// along the leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafTrace {
    pub foliation: usize,
    pub xy: Vec<(f64, f64)>,
    pub uv: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct StraightnessReport {
    pub foliations: Vec<FoliationStraightness>,
    pub leaves: Vec<LeafTrace>,
}

/// The web's foliation functions in order: x, y, f, g₄, …, g_d.
pub fn foliations(web: &WebSpec) -> Vec<(String, Expr)> {
    let mut out = vec![
        ("x".to_string(), Expr::x()),
        ("y".to_string(), Expr::y()),
        ("f".to_string(), web.f.clone()),
    ];
    for (k, g) in web.gs.iter().enumerate() {
        out.push((format!("g{}", k + 4), g.clone()));
    }
    out
}

const MIN_LEAF_POINTS: usize = 4;

pub fn straightness_report(
    result: &LinearizationResult,
    web: &WebSpec,
    leaves_per_foliation: usize,
    params: &BTreeMap<String, f64>,
) -> Result<StraightnessReport, LinearizeError> {
    let grid = result.grid;
    let mut fields = Vec::new();
    for (name, e) in foliations(web) {
        let prog = Program::compile(&e);
        let ps = bind_params(&prog, params)?;
        let field = ScalarField::from_fn(grid, |x, y| prog.eval_f64(x, y, &ps));
        if let Some(k) = field.values.iter().position(|v| !v.is_finite()) {
            return Err(LinearizeError::Singular {
                x: grid.x(k % grid.nx),
                y: grid.y(k / grid.nx),
            });
        }
        fields.push((name, field, prog, ps));
    }
    let jobs: Vec<(usize, f64)> = fields
        .iter()
        .enumerate()
        .flat_map(|(k, (_, phi, _, _))| {
            levels(phi, leaves_per_foliation)
                .into_iter()
                .map(move |c| (k, c))
        })
        .collect();
    let traced: Vec<(usize, Option<(f64, LeafTrace)>)> = jobs
        .par_iter()
        .map(|&(k, c)| {
            let (_, field, prog, ps) = &fields[k];
            let exact = |x, y| prog.eval_f64(x, y, ps);
            let trace = trace_leaf(field, &exact, c, result, k);
            let fit = (trace.uv.len() >= MIN_LEAF_POINTS)
                .then(|| line_fit_residual(&trace.uv))
                .flatten();
            (k, fit.map(|r| (r, trace)))
        })
        .collect();
    let mut foliations: Vec<FoliationStraightness> = fields
        .iter()
        .map(|(name, ..)| FoliationStraightness {
            name: name.clone(),
            residual: 0.0,
            leaves: 0,
            skipped: 0,
        })
        .collect();
    let mut leaves = Vec::new();
    for (k, fit) in traced {
        let entry = &mut foliations[k];
        match fit {
            Some((r, trace)) => {
                entry.residual = entry.residual.max(r);
                entry.leaves += 1;
                leaves.push(trace);
            }
            None => entry.skipped += 1,
        }
    }
    Ok(StraightnessReport { foliations, leaves })
}

/// Evenly spaced interior values of the field's range.
fn levels(phi: &ScalarField, n: usize) -> Vec<f64> {
    let lo = phi.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = phi.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..=n)
        .map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64)
        .collect()
}

/// Root of `g` in [lo, hi], given the sign of g at `lo` from the node value
/// (the interpolant may round to the other sign right at a node).
fn bisect(mut lo: f64, mut hi: f64, lo_negative: bool, g: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Crossings of {φ = c} with every grid row and column. Sign changes are
/// detected on `field`, roots are refined on the exact `phi`, and (u, v)
/// is interpolated from its values and gradient at the nodes.
pub fn trace_leaf(
    field: &ScalarField,
    phi: &(dyn Fn(f64, f64) -> f64 + Sync),
    c: f64,
    coords: &LinearizationResult,
    foliation: usize,
) -> LeafTrace {
    let g = field.grid;
    let (u, v) = (&coords.u, &coords.v);
    let [ux, uy, vx, vy] = &coords.gradient;
    let mut xy = Vec::new();
    let mut uv = Vec::new();
    for j in 0..g.ny {
        let y = g.y(j);
        for i in 0..g.nx - 1 {
            let (a, b) = (field.at(i, j) - c, field.at(i + 1, j) - c);
            if a == 0.0 || (a < 0.0) != (b < 0.0) && b != 0.0 {
                let x = if a == 0.0 {
                    g.x(i)
                } else {
                    bisect(g.x(i), g.x(i + 1), a < 0.0, |x| phi(x, y) - c)
                };
                xy.push((x, y));
                uv.push((u.hermite_row(ux, j, x), v.hermite_row(vx, j, x)));
            }
        }
    }
    for i in 0..g.nx {
        let x = g.x(i);
        for j in 0..g.ny - 1 {
            let (a, b) = (field.at(i, j) - c, field.at(i, j + 1) - c);
            if a != 0.0 && b != 0.0 && (a < 0.0) != (b < 0.0) {
                let y = bisect(g.y(j), g.y(j + 1), a < 0.0, |y| phi(x, y) - c);
                xy.push((x, y));
                uv.push((u.hermite_column(uy, i, y), v.hermite_column(vy, i, y)));
            }
        }
    }
    order_along_principal_axis(&mut xy, &mut uv);
    LeafTrace { foliation, xy, uv }
}

/// Mean and principal unit direction of a point cloud.
fn principal_axis(pts: &[(f64, f64)]) -> ((f64, f64), (f64, f64)) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    ((mx, my), (theta.cos(), theta.sin()))
}

fn order_along_principal_axis(xy: &mut Vec<(f64, f64)>, uv: &mut Vec<(f64, f64)>) {
    if xy.len() < 2 {
        return;
    }
    let (m, d) = principal_axis(xy);
    let mut idx: Vec<usize> = (0..xy.len()).collect();
    let key = |p: (f64, f64)| (p.0 - m.0) * d.0 + (p.1 - m.1) * d.1;
    idx.sort_by(|&a, &b| key(xy[a]).total_cmp(&key(xy[b])));
    *xy = idx.iter().map(|&k| xy[k]).collect();
    *uv = idx.iter().map(|&k| uv[k]).collect();
}

/// Total least squares line fit: max perpendicular distance over extent
/// along the line. `None` for a degenerate (single-point) cloud.
pub fn line_fit_residual(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let (m, d) = principal_axis(pts);
    let mut worst: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        let (dx, dy) = (x - m.0, y - m.1);
        let along = dx * d.0 + dy * d.1;
        let across = -dx * d.1 + dy * d.0;
        worst = worst.max(across.abs());
        lo = lo.min(along);
        hi = hi.max(along);
    }
    let extent = hi - lo;
    (extent > 0.0 && extent.is_finite() && worst.is_finite()).then(|| worst / extent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearizer::grid::Grid;

    #[test]
    fn collinear_points_fit_exactly() {
        let pts: Vec<_> = (0..10).map(|k| (k as f64, 3.0 - 2.0 * k as f64)).collect();
        assert!(line_fit_residual(&pts).unwrap() < 1e-14);
        let vertical: Vec<_> = (0..10).map(|k| (1.5, k as f64)).collect();
        assert!(line_fit_residual(&vertical).unwrap() < 1e-14);
    }

    #[test]
    fn bent_points_do_not() {
        let pts = [(0.0, 0.0), (1.0, 0.1), (2.0, 0.0)];
        let r = line_fit_residual(&pts).unwrap();
        assert!(r > 0.01 && r < 0.1, "{r}");
    }

    #[test]
    fn traces_a_circle_arc() {
        let g = Grid::new([0.5, 1.5, 0.5, 1.5], 21, 21);
        let phi = |x: f64, y: f64| x * x + y * y;
        let field = ScalarField::from_fn(g, phi);
        let coords = identity_coordinates(g);
        let t = trace_leaf(&field, &phi, 2.0, &coords, 0);
        assert!(t.xy.len() > 20);
        for &(x, y) in &t.xy {
            assert!((x * x + y * y - 2.0).abs() < 1e-12);
        }
        assert!(line_fit_residual(&t.uv).unwrap() > 1e-2);
    }

    fn identity_coordinates(g: Grid) -> LinearizationResult {
        let one = ScalarField::from_fn(g, |_, _| 1.0);
        let zero = ScalarField::zeros(g);
        LinearizationResult {
            grid: g,
            base: (g.x0, g.y0),
            lambda0: (0.0, 0.0),
            u: ScalarField::from_fn(g, |x, _| x),
            v: ScalarField::from_fn(g, |_, y| y),
            gradient: [one.clone(), zero.clone(), zero, one],
            flatness_residual: 0.0,
            path_independence_residual: 0.0,
            closedness_residual: 0.0,
            min_jacobian: 1.0,
            straightness: Vec::new(),
        }
    }
}
