//! Benchmark potential-energy surfaces.
//!
//! | surface | dim | Hessian |
//! |---|---|---|
//! | [`MullerBrown`] | 2 | analytic |
//! | [`Leps`] | 2 (`r_AB`, `r_BC`) | finite difference |
//! | [`Eckhardt`] | 2 | analytic |
//! | [`Lj3Reduced`] | 3 (`x2`, `x3`, `y3`) | analytic |
//! | [`LjCluster`] | `3n` | analytic |
//! | [`MorseSlab`] | `3 * movable` | analytic |

mod eckhardt;
mod leps;
mod lj;
mod muller_brown;
mod pair;
mod slab;

pub use eckhardt::Eckhardt;
pub use leps::{Leps, LepsParams};
pub use lj::{Lj3Reduced, LjCluster};
pub use muller_brown::{MullerBrown, MullerBrownParams};
pub use pair::{LennardJones, Morse, PairPotential};
pub use slab::{MorseSlab, SlabConfig};

/// Well-known stationary points quoted for the bundled surfaces, rounded to
/// the published precision.
pub mod reference {
    /// Muller-Brown minima A, B, C.
    pub const MB_SEP_A: [f64; 2] = [-0.558, 1.442];
    pub const MB_SEP_B: [f64; 2] = [-0.050, 0.467];
    pub const MB_SEP_C: [f64; 2] = [0.623, 0.028];
    /// Muller-Brown saddles between A-B and B-C.
    pub const MB_DDP_AB: [f64; 2] = [-0.822, 0.624];
    pub const MB_DDP_BC: [f64; 2] = [0.212, 0.293];
    pub const MB_ENERGY_SEP_A: f64 = -146.7;
    pub const MB_ENERGY_DDP_AB: f64 = -40.67;
    pub const MB_ENERGY_SEP_B: f64 = -80.77;
    pub const MB_ENERGY_DDP_BC: f64 = -72.25;
    /// Exit points on the segments A-B and B-C.
    pub const MB_EXIT_AB: [f64; 2] = [-0.313, 0.971];
    pub const MB_EXIT_BC: [f64; 2] = [0.218, 0.292];

    /// Eckhardt end points, saddles and central source.
    pub const ECK_SEP_A: [f64; 2] = [-3.0, 0.0];
    pub const ECK_SEP_B: [f64; 2] = [3.0, 0.0];
    pub const ECK_DDP_Y: f64 = 1.4644;
    pub const ECK_ENERGY_DDP: f64 = 2.0409;
    pub const ECK_ENERGY_SOURCE: f64 = 4.7358;

    /// Reduced LJ3 coordinates `(x2, x3, y3)`.
    pub const LJ3_SEP_A: [f64; 3] = [1.0, 0.5, 0.866];
    pub const LJ3_SEP_B: [f64; 3] = [1.0, 0.5, -0.866];
    pub const LJ3_DDP: [f64; 3] = [2.0, 1.0, 0.0];
    pub const LJ3_ENERGY_SEP: f64 = -3.000;
    pub const LJ3_ENERGY_DDP: f64 = -2.031;
}
