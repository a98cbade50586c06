use std::fmt::Write as _;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use super::pair::{pair_block, pair_gradient, scatter_block, Morse, PairPotential};
use crate::dynsys::{check_dim, Objective, Point};
use crate::error::{Error, Result};

/// Geometry and potential of an FCC(111) slab with an adatom island.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlabConfig {
    pub layers: usize,
    pub atoms_per_layer: usize,
    pub fixed_layers: usize,
    /// Nearest-neighbour distance in Angstrom.
    pub lattice_constant: f64,
    pub island_size: usize,
    pub cutoff: f64,
    pub morse_a: f64,
    pub morse_alpha: f64,
    pub morse_r0: f64,
}

impl Default for SlabConfig {
    fn default() -> Self {
        Self {
            layers: 6,
            atoms_per_layer: 56,
            fixed_layers: 3,
            lattice_constant: 2.74,
            island_size: 7,
            cutoff: 9.5,
            morse_a: 0.71,
            morse_alpha: 1.61,
            morse_r0: 2.9,
        }
    }
}

impl SlabConfig {
    /// Small slab for fast tests: 3 layers of 20 atoms, one fixed.
    pub fn desk_scale() -> Self {
        Self {
            layers: 3,
            atoms_per_layer: 20,
            fixed_layers: 1,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("invalid slab geometry: {msg}")));
        if self.layers == 0 || self.atoms_per_layer == 0 {
            return bad("layers and atoms_per_layer must be positive");
        }
        if self.fixed_layers >= self.layers {
            return bad("fixed_layers must be below layers");
        }
        if self.island_size > self.atoms_per_layer {
            return bad("island larger than a layer");
        }
        for (name, v) in [
            ("lattice_constant", self.lattice_constant),
            ("cutoff", self.cutoff),
            ("morse_a", self.morse_a),
            ("morse_alpha", self.morse_alpha),
            ("morse_r0", self.morse_r0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Morse slab energy as a function of the movable-atom coordinates.
///
/// Atoms are stored fixed-first; variables are the `(x, y, z)` triples of the
/// movable atoms (the top free layers followed by the island).
#[derive(Debug, Clone)]
pub struct MorseSlab {
    cfg: SlabConfig,
    pot: Morse,
    fixed: Vec<Vector3<f64>>,
    initial: Vec<Vector3<f64>>,
    /// Layer index of every movable atom; the island is layer `cfg.layers`.
    layer_of: Vec<usize>,
}

fn rows_cols(n: usize) -> (usize, usize) {
    // smallest divisor >= sqrt(n) gives the column count
    let cols = (1..=n)
        .find(|c| n.is_multiple_of(*c) && c * c >= n)
        .unwrap_or(n);
    (n / cols, cols)
}

fn layer_sites(cfg: &SlabConfig, layer: usize) -> Vec<Vector3<f64>> {
    let a = cfg.lattice_constant;
    let (rows, cols) = rows_cols(cfg.atoms_per_layer);
    let row_dy = a * 3f64.sqrt() / 2.0;
    let shift = (layer % 3) as f64;
    let ox = shift * a / 2.0;
    let oy = shift * a / (2.0 * 3f64.sqrt());
    let z = layer as f64 * a * (2.0f64 / 3.0).sqrt();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let x = c as f64 * a + (r % 2) as f64 * a / 2.0 + ox;
            out.push(Vector3::new(x, r as f64 * row_dy + oy, z));
        }
    }
    out
}

impl MorseSlab {
    pub fn new(cfg: SlabConfig) -> Result<Self> {
        cfg.validate()?;
        let pot = Morse {
            a: cfg.morse_a,
            alpha: cfg.morse_alpha,
            r0: cfg.morse_r0,
            cutoff: cfg.cutoff,
        };
        let mut fixed = Vec::new();
        let mut initial = Vec::new();
        let mut layer_of = Vec::new();
        for layer in 0..cfg.layers {
            let sites = layer_sites(&cfg, layer);
            if layer < cfg.fixed_layers {
                fixed.extend(sites);
            } else {
                layer_of.extend(std::iter::repeat_n(layer, sites.len()));
                initial.extend(sites);
            }
        }
        if cfg.island_size > 0 {
            let island = Self::island_sites(&cfg);
            layer_of.extend(std::iter::repeat_n(cfg.layers, island.len()));
            initial.extend(island);
        }
        Ok(Self {
            cfg,
            pot,
            fixed,
            initial,
            layer_of,
        })
    }

    /// The `island_size` hollow sites nearest the slab centre, continuing the
    /// ABC stacking (fcc hollows above the top layer).
    fn island_sites(cfg: &SlabConfig) -> Vec<Vector3<f64>> {
        let top = layer_sites(cfg, cfg.layers - 1);
        let centre = top.iter().fold(Vector3::zeros(), |acc, p| acc + p) / top.len() as f64;
        let mut sites = layer_sites(cfg, cfg.layers);
        let anchor = *sites
            .iter()
            .min_by(|p, q| {
                let dp = (*p - centre).xy().norm();
                let dq = (*q - centre).xy().norm();
                dp.total_cmp(&dq)
            })
            .expect("non-empty layer");
        sites.sort_by(|p, q| {
            let kp = ((p - anchor).xy().norm(), (p - anchor).y.atan2((p - anchor).x));
            let kq = ((q - anchor).xy().norm(), (q - anchor).y.atan2((q - anchor).x));
            kp.0.total_cmp(&kq.0).then(kp.1.total_cmp(&kq.1))
        });
        sites.truncate(cfg.island_size);
        sites
    }

    pub fn config(&self) -> &SlabConfig {
        &self.cfg
    }

    pub fn movable_atoms(&self) -> usize {
        self.initial.len()
    }

    pub fn fixed_atoms(&self) -> usize {
        self.fixed.len()
    }

    /// Layer index of each movable atom (the island reports `layers`).
    pub fn movable_layers(&self) -> &[usize] {
        &self.layer_of
    }

    /// Indices of the island atoms among the movable atoms.
    pub fn island_indices(&self) -> Vec<usize> {
        (0..self.layer_of.len())
            .filter(|&i| self.layer_of[i] == self.cfg.layers)
            .collect()
    }

    /// Unrelaxed coordinates of the movable atoms.
    pub fn initial_point(&self) -> Point {
        Point::from_iterator(
            3 * self.initial.len(),
            self.initial.iter().flat_map(|p| [p.x, p.y, p.z]),
        )
    }

    /// `x` with every island atom shifted in-plane by `(dx, dy)`.
    pub fn translate_island(&self, x: &Point, dx: f64, dy: f64) -> Result<Point> {
        check_dim(self.dim(), x)?;
        let mut out = x.clone();
        for k in self.island_indices() {
            out[3 * k] += dx;
            out[3 * k + 1] += dy;
        }
        Ok(out)
    }

    /// In-plane shift from an fcc hollow to the hcp hollow at `angle_deg`
    /// (30, 150 or 270 degrees for this stacking).
    pub fn hollow_shift(&self, angle_deg: f64) -> (f64, f64) {
        let len = self.cfg.lattice_constant / 3f64.sqrt();
        let th = angle_deg.to_radians();
        (len * th.cos(), len * th.sin())
    }

    pub fn pair_potential(&self) -> &Morse {
        &self.pot
    }

    fn atom(x: &Point, i: usize) -> Vector3<f64> {
        Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])
    }

    /// Visits every interacting pair (movable-movable once, movable-fixed)
    /// with the separation vector `p_i - p_j` and the variable slots.
    fn for_each_pair(
        &self,
        x: &Point,
        mut visit: impl FnMut(&Vector3<f64>, Option<usize>, Option<usize>),
    ) -> Result<()> {
        check_dim(self.dim(), x)?;
        let m = self.initial.len();
        let rc2 = self.cfg.cutoff * self.cfg.cutoff;
        for i in 0..m {
            let pi = Self::atom(x, i);
            for j in i + 1..m {
                let d = pi - Self::atom(x, j);
                let r2 = d.norm_squared();
                if r2 == 0.0 {
                    return Err(Error::Singularity(format!("atoms {i} and {j} coincide")));
                }
                if r2 < rc2 {
                    visit(&d, Some(i), Some(j));
                }
            }
            for f in &self.fixed {
                let d = pi - f;
                let r2 = d.norm_squared();
                if r2 == 0.0 {
                    return Err(Error::Singularity(format!("atom {i} sits on a fixed atom")));
                }
                if r2 < rc2 {
                    visit(&d, Some(i), None);
                }
            }
        }
        Ok(())
    }

    /// XYZ text of the full slab (fixed atoms first) at movable coordinates `x`.
    pub fn to_xyz(&self, x: &Point, element: &str, comment: &str) -> Result<String> {
        check_dim(self.dim(), x)?;
        let mut out = String::new();
        let total = self.fixed.len() + self.initial.len();
        let _ = writeln!(out, "{total}");
        let _ = writeln!(out, "{comment}");
        let movable = (0..self.initial.len()).map(|i| Self::atom(x, i));
        for p in self.fixed.iter().copied().chain(movable) {
            let _ = writeln!(out, "{element} {} {} {}", p.x, p.y, p.z);
        }
        Ok(out)
    }
}

impl Objective for MorseSlab {
    fn dim(&self) -> usize {
        3 * self.initial.len()
    }

    fn value(&self, x: &Point) -> Result<f64> {
        let mut e = 0.0;
        self.for_each_pair(x, |d, _, _| e += self.pot.v(d.norm()))?;
        Ok(e)
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        Ok(self.value_gradient(x)?.1)
    }

    fn value_gradient(&self, x: &Point) -> Result<(f64, Point)> {
        let mut e = 0.0;
        let mut g = Point::zeros(self.dim());
        self.for_each_pair(x, |d, si, sj| {
            let (r, gi) = pair_gradient(&self.pot, d);
            e += self.pot.v(r);
            for a in 0..3 {
                if let Some(i) = si {
                    g[3 * i + a] += gi[a];
                }
                if let Some(j) = sj {
                    g[3 * j + a] -= gi[a];
                }
            }
        })?;
        Ok((e, g))
    }

    fn hessian(&self, x: &Point) -> Option<Result<DMatrix<f64>>> {
        let mut h = DMatrix::zeros(self.dim(), self.dim());
        let res = self.for_each_pair(x, |d, si, sj| {
            scatter_block(&mut h, &pair_block(&self.pot, d), si, sj);
        });
        Some(res.map(|_| h))
    }
}
