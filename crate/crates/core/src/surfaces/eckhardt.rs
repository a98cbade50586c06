use nalgebra::DMatrix;

use crate::dynsys::{check_dim, Objective, Point};
use crate::error::Result;

/// Eckhardt surface: three Gaussian bumps plus a harmonic term in `y`.
///
/// The valley along the x axis has no true minimum; the points `(+-3, 0)` sit
/// on its asymptotically flat floor and serve as the two end states.
#[derive(Debug, Clone, Copy, Default)]
pub struct Eckhardt;

/// `(weight, width k, centre y)` of each bump `w exp(-k (x^2 + (y - q)^2))`.
const BUMPS: [(f64, f64, f64); 3] = [(1.0, 1.0, -1.0), (1.0, 1.0, 1.0), (4.0, 1.5, 0.0)];

impl Eckhardt {
    pub fn new() -> Self {
        Self
    }
}

impl Objective for Eckhardt {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, p: &Point) -> Result<f64> {
        check_dim(2, p)?;
        let (x, y) = (p[0], p[1]);
        let bumps: f64 = BUMPS
            .iter()
            .map(|&(w, k, q)| w * (-k * (x * x + (y - q) * (y - q))).exp())
            .sum();
        Ok(bumps + 0.5 * y * y)
    }

    fn gradient(&self, p: &Point) -> Result<Point> {
        check_dim(2, p)?;
        let (x, y) = (p[0], p[1]);
        let mut g = Point::from_vec(vec![0.0, y]);
        for &(w, k, q) in &BUMPS {
            let e = w * (-k * (x * x + (y - q) * (y - q))).exp();
            g[0] -= 2.0 * k * x * e;
            g[1] -= 2.0 * k * (y - q) * e;
        }
        Ok(g)
    }

    fn hessian(&self, p: &Point) -> Option<Result<DMatrix<f64>>> {
        if let Err(e) = check_dim(2, p) {
            return Some(Err(e));
        }
        let (x, y) = (p[0], p[1]);
        let mut h = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        for &(w, k, q) in &BUMPS {
            let dy = y - q;
            let e = w * (-k * (x * x + dy * dy)).exp();
            h[(0, 0)] += (4.0 * k * k * x * x - 2.0 * k) * e;
            h[(0, 1)] += 4.0 * k * k * x * dy * e;
            h[(1, 1)] += (4.0 * k * k * dy * dy - 2.0 * k) * e;
        }
        h[(1, 0)] = h[(0, 1)];
        Some(Ok(h))
    }
}
