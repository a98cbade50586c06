use serde::{Deserialize, Serialize};

use crate::dynsys::{check_dim, Objective, Point};
use crate::error::{Error, Result};

/// LEPS parameters for a collinear three-atom system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LepsParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d_ab: f64,
    pub d_bc: f64,
    pub d_ac: f64,
    pub alpha: f64,
    pub r0: f64,
}

impl Default for LepsParams {
    fn default() -> Self {
        Self {
            a: 0.05,
            b: 0.05,
            c: 0.05,
            d_ab: 4.746,
            d_bc: 4.746,
            d_ac: 4.746,
            alpha: 1.942,
            r0: 0.742,
        }
    }
}

/// LEPS surface in `(r_AB, r_BC)` with `r_AC = r_AB + r_BC`.
///
/// The exchange cross terms enter the square root with negative sign, which
/// yields the reactant/product channels separated by a collinear saddle near
/// `(0.986, 0.986)`. Both channels descend monotonically to the diatomic
/// asymptote, so the end states are valley-floor points, not true minima.
#[derive(Debug, Clone, Default)]
pub struct Leps {
    pub params: LepsParams,
}

impl Leps {
    pub fn new() -> Self {
        Self::default()
    }

    /// Coulomb integral `Q(r)` and its derivative.
    pub fn coulomb(&self, d: f64, r: f64) -> (f64, f64) {
        let p = &self.params;
        let e = (-p.alpha * (r - p.r0)).exp();
        let q = 0.5 * d * (1.5 * e * e - e);
        let dq = 0.5 * d * p.alpha * (-3.0 * e * e + e);
        (q, dq)
    }

    /// Exchange integral `J(r)` and its derivative.
    pub fn exchange(&self, d: f64, r: f64) -> (f64, f64) {
        let p = &self.params;
        let e = (-p.alpha * (r - p.r0)).exp();
        let j = 0.25 * d * (e * e - 6.0 * e);
        let dj = 0.25 * d * p.alpha * (-2.0 * e * e + 6.0 * e);
        (j, dj)
    }

    fn check_domain(x: &Point) -> Result<()> {
        check_dim(2, x)?;
        if !(x[0] > 0.0 && x[1] > 0.0) {
            return Err(Error::Domain(format!(
                "LEPS distances must be positive, got ({}, {})",
                x[0], x[1]
            )));
        }
        Ok(())
    }

    /// Energy and gradient in one pass.
    fn eval(&self, x: &Point) -> Result<(f64, Point)> {
        Self::check_domain(x)?;
        let p = &self.params;
        let r = [x[0], x[1], x[0] + x[1]];
        let d = [p.d_ab, p.d_bc, p.d_ac];
        let s = [1.0 + p.a, 1.0 + p.b, 1.0 + p.c];
        let mut q = [0.0; 3];
        let mut dq = [0.0; 3];
        let mut j = [0.0; 3];
        let mut dj = [0.0; 3];
        for i in 0..3 {
            let (qi, dqi) = self.coulomb(d[i], r[i]);
            let (ji, dji) = self.exchange(d[i], r[i]);
            q[i] = qi / s[i];
            dq[i] = dqi / s[i];
            j[i] = ji / s[i];
            dj[i] = dji / s[i];
        }
        let inner = j[0] * j[0] + j[1] * j[1] + j[2] * j[2]
            - j[0] * j[1]
            - j[1] * j[2]
            - j[0] * j[2];
        let root = inner.max(0.0).sqrt();
        let energy = q[0] + q[1] + q[2] - root;
        // dS/dj_i = 2 j_i - (sum of the other two)
        let ds: Vec<f64> = (0..3)
            .map(|i| 2.0 * j[i] - (j[(i + 1) % 3] + j[(i + 2) % 3]))
            .collect();
        let half_inv = if root > 0.0 { 0.5 / root } else { 0.0 };
        // r_AC depends on both variables
        let g_ac = dq[2] - half_inv * ds[2] * dj[2];
        let g0 = dq[0] - half_inv * ds[0] * dj[0] + g_ac;
        let g1 = dq[1] - half_inv * ds[1] * dj[1] + g_ac;
        Ok((energy, Point::from_vec(vec![g0, g1])))
    }
}

impl Objective for Leps {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Point) -> Result<f64> {
        Ok(self.eval(x)?.0)
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        Ok(self.eval(x)?.1)
    }
}
