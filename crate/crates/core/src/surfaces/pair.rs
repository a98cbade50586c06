use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// A radial pair potential with first and second derivatives.
pub trait PairPotential: Send + Sync {
    fn v(&self, r: f64) -> f64;
    fn dv(&self, r: f64) -> f64;
    fn d2v(&self, r: f64) -> f64;
}

/// `v(r) = eps * ((r0/r)^12 - 2 (r0/r)^6)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LennardJones {
    pub eps: f64,
    pub r0: f64,
}

impl Default for LennardJones {
    fn default() -> Self {
        Self { eps: 1.0, r0: 1.0 }
    }
}

impl PairPotential for LennardJones {
    fn v(&self, r: f64) -> f64 {
        let s6 = (self.r0 / r).powi(6);
        self.eps * (s6 * s6 - 2.0 * s6)
    }
    fn dv(&self, r: f64) -> f64 {
        let s6 = (self.r0 / r).powi(6);
        self.eps * 12.0 * (s6 - s6 * s6) / r
    }
    fn d2v(&self, r: f64) -> f64 {
        let s6 = (self.r0 / r).powi(6);
        self.eps * (156.0 * s6 * s6 - 84.0 * s6) / (r * r)
    }
}

/// Morse potential `A (e^{-2a(r-r0)} - 2 e^{-a(r-r0)})`, cut at `cutoff` and
/// shifted so the energy is continuous there. The force jumps at the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Morse {
    pub a: f64,
    pub alpha: f64,
    pub r0: f64,
    pub cutoff: f64,
}

impl Morse {
    /// Uncut potential.
    pub fn raw(&self, r: f64) -> f64 {
        let e = (-self.alpha * (r - self.r0)).exp();
        self.a * (e * e - 2.0 * e)
    }
}

impl PairPotential for Morse {
    fn v(&self, r: f64) -> f64 {
        if r >= self.cutoff {
            0.0
        } else {
            self.raw(r) - self.raw(self.cutoff)
        }
    }
    fn dv(&self, r: f64) -> f64 {
        if r >= self.cutoff {
            return 0.0;
        }
        let e = (-self.alpha * (r - self.r0)).exp();
        2.0 * self.a * self.alpha * (e - e * e)
    }
    fn d2v(&self, r: f64) -> f64 {
        if r >= self.cutoff {
            return 0.0;
        }
        let e = (-self.alpha * (r - self.r0)).exp();
        self.a * self.alpha * self.alpha * (4.0 * e * e - 2.0 * e)
    }
}

/// Gradient of `v(|p_i - p_j|)` with respect to `p_i`, and the pair distance.
pub(crate) fn pair_gradient<P: PairPotential + ?Sized>(
    pot: &P,
    d: &Vector3<f64>,
) -> (f64, Vector3<f64>) {
    let r = d.norm();
    (r, d * (pot.dv(r) / r))
}

/// Hessian block `d^2 v / dp_i dp_i^T`; the mixed block is its negative.
pub(crate) fn pair_block<P: PairPotential + ?Sized>(pot: &P, d: &Vector3<f64>) -> Matrix3<f64> {
    let r = d.norm();
    let u = d / r;
    let uu = u * u.transpose();
    let dv = pot.dv(r);
    uu * pot.d2v(r) + (Matrix3::identity() - uu) * (dv / r)
}

/// Adds the pair block to a Hessian whose variables are indexed by `slot`
/// (`None` for fixed atoms).
pub(crate) fn scatter_block(
    h: &mut DMatrix<f64>,
    block: &Matrix3<f64>,
    si: Option<usize>,
    sj: Option<usize>,
) {
    for a in 0..3 {
        for b in 0..3 {
            let v = block[(a, b)];
            if let Some(i) = si {
                h[(3 * i + a, 3 * i + b)] += v;
            }
            if let Some(j) = sj {
                h[(3 * j + a, 3 * j + b)] += v;
            }
            if let (Some(i), Some(j)) = (si, sj) {
                h[(3 * i + a, 3 * j + b)] -= v;
                h[(3 * j + a, 3 * i + b)] -= v;
            }
        }
    }
}
