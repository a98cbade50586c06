//! Stability-region methods for saddle search and global optimization.
//!
//! An objective `f` is studied through its gradient flow `x' = -grad f(x)`:
//! minima are stable equilibria, saddles lie on the boundaries between
//! their basins, and neighbouring minima are reached by leaving a basin
//! through an exit point.
//!
//! - [`dynsys`]: the [`dynsys::Objective`] trait, Euler integration and
//!   critical-point classification.
//! - [`surfaces`]: analytic test potentials (Muller-Brown, LEPS, Eckhardt,
//!   Lennard-Jones, a Morse slab with an adatom island).
//! - [`solvers`]: Newton, L-BFGS and Levenberg-Marquardt.
//! - [`saddle`]: exit point, boundary tracing and saddle refinement between
//!   two minima.
//! - [`tiersearch`]: tier-by-tier enumeration of neighbouring minima with a
//!   pluggable [`tiersearch::LocalSolver`].
//! - [`gmm`], [`smoothing`]: Gaussian mixtures, EM, tier-search EM and
//!   likelihood smoothing.
//! - [`mlp`]: one-hidden-layer networks trained by LM and tier search.
//! - [`evo`]: evolutionary search with local refinement variants.
//! - [`experiments`]: configurable runs behind the `trusttech` binary.
//!
//! ```
//! use trusttech::saddle::{locate_ddp, SaddleConfig};
//! use trusttech::surfaces::{reference as r, MullerBrown};
//! use trusttech::dynsys::Point;
//!
//! let mb = MullerBrown::new();
//! let a = Point::from_column_slice(&r::MB_SEP_A);
//! let b = Point::from_column_slice(&r::MB_SEP_B);
//! let s = locate_ddp(&mb, &a, &b, &SaddleConfig::default()).unwrap();
//! assert_eq!(s.ddp_class.negative_eigenvalues, 1);
//! ```

// negated comparisons are how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynsys;
pub mod error;
pub mod evo;
pub mod experiments;
pub mod gmm;
pub mod mlp;
pub mod saddle;
pub mod smoothing;
pub mod solvers;
pub mod surfaces;
pub mod tiersearch;

pub use error::{Error, Result};
