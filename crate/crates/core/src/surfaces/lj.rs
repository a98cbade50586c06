use nalgebra::{DMatrix, Vector3};

use super::pair::{pair_block, pair_gradient, scatter_block, LennardJones, PairPotential};
use crate::dynsys::{check_dim, Objective, Point};
use crate::error::{Error, Result};

const COINCIDENT: f64 = 1e-12;

/// Lennard-Jones cluster of `n` atoms in full Cartesian coordinates
/// `(x1, y1, z1, x2, ...)`.
#[derive(Debug, Clone)]
pub struct LjCluster {
    n_atoms: usize,
    pot: LennardJones,
}

impl LjCluster {
    pub fn new(n_atoms: usize) -> Result<Self> {
        if n_atoms < 2 {
            return Err(Error::Config(format!(
                "LJ cluster needs at least 2 atoms, got {n_atoms}"
            )));
        }
        Ok(Self {
            n_atoms,
            pot: LennardJones::default(),
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    fn atom(x: &Point, i: usize) -> Vector3<f64> {
        Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])
    }

    fn separation(x: &Point, i: usize, j: usize) -> Result<Vector3<f64>> {
        let d = Self::atom(x, i) - Self::atom(x, j);
        if d.norm() < COINCIDENT {
            return Err(Error::Singularity(format!("atoms {i} and {j} coincide")));
        }
        Ok(d)
    }
}

impl Objective for LjCluster {
    fn dim(&self) -> usize {
        3 * self.n_atoms
    }

    fn value(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let mut e = 0.0;
        for i in 0..self.n_atoms {
            for j in i + 1..self.n_atoms {
                e += self.pot.v(Self::separation(x, i, j)?.norm());
            }
        }
        Ok(e)
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x)?;
        let mut g = Point::zeros(self.dim());
        for i in 0..self.n_atoms {
            for j in i + 1..self.n_atoms {
                let (_, gi) = pair_gradient(&self.pot, &Self::separation(x, i, j)?);
                for a in 0..3 {
                    g[3 * i + a] += gi[a];
                    g[3 * j + a] -= gi[a];
                }
            }
        }
        Ok(g)
    }

    fn hessian(&self, x: &Point) -> Option<Result<DMatrix<f64>>> {
        let run = || -> Result<DMatrix<f64>> {
            check_dim(self.dim(), x)?;
            let mut h = DMatrix::zeros(self.dim(), self.dim());
            for i in 0..self.n_atoms {
                for j in i + 1..self.n_atoms {
                    let block = pair_block(&self.pot, &Self::separation(x, i, j)?);
                    scatter_block(&mut h, &block, Some(i), Some(j));
                }
            }
            Ok(h)
        };
        Some(run())
    }
}

/// Three-atom LJ cluster in reduced planar coordinates `(x2, x3, y3)`:
/// atom 1 at the origin, atom 2 on the x axis, all atoms in the z = 0 plane.
#[derive(Debug, Clone)]
pub struct Lj3Reduced {
    cluster: LjCluster,
}

impl Default for Lj3Reduced {
    fn default() -> Self {
        Self::new()
    }
}

impl Lj3Reduced {
    /// Full-coordinate variable indices of `(x2, x3, y3)`.
    const MAP: [usize; 3] = [3, 6, 7];

    pub fn new() -> Self {
        Self {
            cluster: LjCluster::new(3).expect("three atoms"),
        }
    }

    /// Embeds reduced coordinates into the 9-dimensional cluster space.
    pub fn embed(x: &Point) -> Point {
        let mut full = Point::zeros(9);
        for (k, &idx) in Self::MAP.iter().enumerate() {
            full[idx] = x[k];
        }
        full
    }
}

impl Objective for Lj3Reduced {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &Point) -> Result<f64> {
        check_dim(3, x)?;
        self.cluster.value(&Self::embed(x))
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        check_dim(3, x)?;
        let g = self.cluster.gradient(&Self::embed(x))?;
        Ok(Point::from_iterator(3, Self::MAP.iter().map(|&i| g[i])))
    }

    fn hessian(&self, x: &Point) -> Option<Result<DMatrix<f64>>> {
        if let Err(e) = check_dim(3, x) {
            return Some(Err(e));
        }
        Some(self.cluster.hessian(&Self::embed(x))?.map(|h| {
            DMatrix::from_fn(3, 3, |r, c| h[(Self::MAP[r], Self::MAP[c])])
        }))
    }
}
