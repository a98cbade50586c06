use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynsys::{check_dim, Objective, Point};
use crate::error::Result;

/// Coefficients of the four Gaussian-like terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MullerBrownParams {
    pub big_a: [f64; 4],
    pub a: [f64; 4],
    pub b: [f64; 4],
    pub c: [f64; 4],
    pub x0: [f64; 4],
    pub y0: [f64; 4],
}

impl Default for MullerBrownParams {
    fn default() -> Self {
        Self {
            big_a: [-200.0, -100.0, -170.0, 15.0],
            a: [-1.0, -1.0, -6.5, 0.7],
            b: [0.0, 0.0, 11.0, 0.6],
            c: [-10.0, -10.0, -6.5, 0.7],
            x0: [1.0, 0.0, -0.5, -1.0],
            y0: [0.0, 0.5, 1.5, 1.0],
        }
    }
}

/// The two-dimensional Muller-Brown surface.
#[derive(Debug, Clone, Default)]
pub struct MullerBrown {
    pub params: MullerBrownParams,
}

impl MullerBrown {
    pub fn new() -> Self {
        Self::default()
    }

    /// Per-term (weight, dE/dx factor, dE/dy factor, dx, dy) at `(x, y)`.
    fn terms(&self, x: f64, y: f64) -> [(f64, f64, f64, usize); 4] {
        let p = &self.params;
        let mut out = [(0.0, 0.0, 0.0, 0); 4];
        for (i, slot) in out.iter_mut().enumerate() {
            let dx = x - p.x0[i];
            let dy = y - p.y0[i];
            let e = p.big_a[i]
                * (p.a[i] * dx * dx + p.b[i] * dx * dy + p.c[i] * dy * dy).exp();
            let px = 2.0 * p.a[i] * dx + p.b[i] * dy;
            let py = p.b[i] * dx + 2.0 * p.c[i] * dy;
            *slot = (e, px, py, i);
        }
        out
    }
}

impl Objective for MullerBrown {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Point) -> Result<f64> {
        check_dim(2, x)?;
        Ok(self.terms(x[0], x[1]).iter().map(|t| t.0).sum())
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        check_dim(2, x)?;
        let mut g = Point::zeros(2);
        for (e, px, py, _) in self.terms(x[0], x[1]) {
            g[0] += e * px;
            g[1] += e * py;
        }
        Ok(g)
    }

    fn hessian(&self, x: &Point) -> Option<Result<DMatrix<f64>>> {
        if let Err(e) = check_dim(2, x) {
            return Some(Err(e));
        }
        let p = &self.params;
        let mut h = DMatrix::zeros(2, 2);
        for (e, px, py, i) in self.terms(x[0], x[1]) {
            h[(0, 0)] += e * (px * px + 2.0 * p.a[i]);
            h[(0, 1)] += e * (px * py + p.b[i]);
            h[(1, 1)] += e * (py * py + 2.0 * p.c[i]);
        }
        h[(1, 0)] = h[(0, 1)];
        Some(Ok(h))
    }
}
