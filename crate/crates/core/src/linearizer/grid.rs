use serde::Serialize;

/// Uniform rectangular grid of `nx × ny` nodes including the corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(rect: [f64; 4], nx: usize, ny: usize) -> Grid {
        assert!(nx >= 5 && ny >= 5, "grid needs at least 5 nodes per side");
        Grid {
            x0: rect[0],
            x1: rect[1],
            y0: rect[2],
            y1: rect[3],
            nx,
            ny,
        }
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x1
        } else {
            self.x0 + i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.y1
        } else {
            self.y0 + j as f64 * self.hy()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn diameter(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    /// Node nearest to (x, y), clamped to the grid.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let snap = |v: f64, lo: f64, h: f64, n: usize| {
            (((v - lo) / h).round().max(0.0) as usize).min(n - 1)
        };
        (
            snap(x, self.x0, self.hx(), self.nx),
            snap(y, self.y0, self.hy(), self.ny),
        )
    }

    /// The same rectangle with the step halved.
    pub fn refined(&self) -> Grid {
        Grid {
            nx: 2 * self.nx - 1,
            ny: 2 * self.ny - 1,
            ..*self
        }
    }
}

/// A scalar sampled at every node of a grid, stored row by row (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> ScalarField {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> ScalarField {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        ScalarField { grid, values }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// ∂/∂x by fourth-order differences, one-sided near the edges.
    pub fn dx(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g);
        let mut line = vec![0.0; g.nx];
        for j in 0..g.ny {
            for (i, v) in line.iter_mut().enumerate() {
                *v = self.at(i, j);
            }
            let d = derivative_4(&line, g.hx());
            for (i, v) in d.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        out
    }

    /// ∂/∂y by fourth-order differences, one-sided near the edges.
    pub fn dy(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g);
        let mut line = vec![0.0; g.ny];
        for i in 0..g.nx {
            for (j, v) in line.iter_mut().enumerate() {
                *v = self.at(i, j);
            }
            let d = derivative_4(&line, g.hy());
            for (j, v) in d.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        out
    }

    /// Cubic Hermite interpolation along row `j` at abscissa `x`, with
    /// `dx` holding ∂/∂x of this field at the nodes.
    pub fn hermite_row(&self, dx: &ScalarField, j: usize, x: f64) -> f64 {
        let g = self.grid;
        let i = (((x - g.x0) / g.hx()).floor().max(0.0) as usize).min(g.nx - 2);
        let (h, t) = (g.hx(), (x - g.x(i)) / g.hx());
        hermite(
            t,
            h,
            [
                self.at(i, j),
                dx.at(i, j),
                self.at(i + 1, j),
                dx.at(i + 1, j),
            ],
        )
    }

    /// Cubic Hermite interpolation along column `i` at ordinate `y`.
    pub fn hermite_column(&self, dy: &ScalarField, i: usize, y: f64) -> f64 {
        let g = self.grid;
        let j = (((y - g.y0) / g.hy()).floor().max(0.0) as usize).min(g.ny - 2);
        let (h, t) = (g.hy(), (y - g.y(j)) / g.hy());
        hermite(
            t,
            h,
            [
                self.at(i, j),
                dy.at(i, j),
                self.at(i, j + 1),
                dy.at(i, j + 1),
            ],
        )
    }
}

fn hermite(t: f64, h: f64, [v0, d0, v1, d1]: [f64; 4]) -> f64 {
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * v0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (3.0 * t2 - 2.0 * t3) * v1
        + (t3 - t2) * h * d1
}

fn derivative_4(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    let c = 12.0 * h;
    for i in 2..n - 2 {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / c;
    }
    d[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / c;
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / c;
    let m = n - 1;
    d[m] = (25.0 * v[m] - 48.0 * v[m - 1] + 36.0 * v[m - 2] - 16.0 * v[m - 3] + 3.0 * v[m - 4]) / c;
    d[m - 1] = (3.0 * v[m] + 10.0 * v[m - 1] - 18.0 * v[m - 2] + 6.0 * v[m - 3] - v[m - 4]) / c;
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences_are_exact_on_quartics() {
        let g = Grid::new([0.0, 1.0, 0.0, 2.0], 11, 9);
        let f = ScalarField::from_fn(g, |x, y| x.powi(4) + x * y.powi(3));
        let dx = f.dx();
        let dy = f.dy();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = (g.x(i), g.y(j));
                assert!((dx.at(i, j) - (4.0 * x.powi(3) + y.powi(3))).abs() < 1e-10);
                assert!((dy.at(i, j) - 3.0 * x * y * y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hermite_is_exact_on_cubics() {
        let g = Grid::new([1.0, 2.0, 0.0, 1.0], 9, 9);
        let f = ScalarField::from_fn(g, |x, y| x.powi(3) - 2.0 * x + y);
        let fx = ScalarField::from_fn(g, |x, _| 3.0 * x * x - 2.0);
        for x in [1.0f64, 1.03, 1.5, 1.97, 2.0] {
            let want = x.powi(3) - 2.0 * x + g.y(4);
            assert!((f.hermite_row(&fx, 4, x) - want).abs() < 1e-12);
        }
        let c = ScalarField::from_fn(g, |x, y| y.powi(3) + x);
        let cy = ScalarField::from_fn(g, |_, y| 3.0 * y * y);
        let want = 0.41f64.powi(3) + g.x(2);
        assert!((c.hermite_column(&cy, 2, 0.41) - want).abs() < 1e-12);
    }

    #[test]
    fn nearest_and_refine() {
        let g = Grid::new([0.0, 1.0, 0.0, 1.0], 41, 41);
        assert_eq!(g.nearest(0.5, 0.5), (20, 20));
        assert_eq!(g.nearest(-3.0, 7.0), (0, 40));
        let r = g.refined();
        assert_eq!(r.nx, 81);
        assert!((r.hx() * 2.0 - g.hx()).abs() < 1e-15);
    }
}
