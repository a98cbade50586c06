//! Tier-by-tier exploration of neighbouring local minima.
//!
//! From a refined minimum, directions are generated (random or Hessian
//! eigenvectors). Along each ray, [`exit_along`] finds the first value peak.
//! A point just past that exit is refined by a [`LocalSolver`], and the new
//! minimum joins the [`SolutionSet`] unless it duplicates a stored one.
//! Tier `t + 1` grows from the tier-`t` solutions that pass the prune
//! threshold. All objectives are minimized; callers negate likelihoods.

use std::io::Write;

use log::debug;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Objective, Point};
use crate::error::{Error, Result};
use crate::solvers::{minimize_lbfgs, LbfgsConfig};

/// Output of a local solver run.
#[derive(Debug, Clone)]
pub struct Refined {
    pub point: Point,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Curvature estimate at `point` (for example `J^T J` from LM).
    pub curvature: Option<DMatrix<f64>>,
    /// Typical step length taken by the solver.
    pub step_hint: Option<f64>,
}

/// Refines a starting point to a nearby local minimum.
pub trait LocalSolver: Sync {
    fn refine(&self, x0: &Point) -> Result<Refined>;

    /// Refinement with an iteration cap; solvers without one ignore it.
    fn refine_capped(&self, x0: &Point, _max_iter: Option<usize>) -> Result<Refined> {
        self.refine(x0)
    }
}

/// L-BFGS as a [`LocalSolver`].
pub struct LbfgsSolver<'a, O: ?Sized> {
    pub obj: &'a O,
    pub cfg: LbfgsConfig,
}

impl<'a, O: Objective + ?Sized> LbfgsSolver<'a, O> {
    pub fn new(obj: &'a O) -> Self {
        Self {
            obj,
            cfg: LbfgsConfig::default(),
        }
    }
}

impl<O: Objective + ?Sized> LocalSolver for LbfgsSolver<'_, O> {
    fn refine(&self, x0: &Point) -> Result<Refined> {
        self.refine_capped(x0, None)
    }

    fn refine_capped(&self, x0: &Point, max_iter: Option<usize>) -> Result<Refined> {
        let mut cfg = self.cfg;
        if let Some(cap) = max_iter {
            cfg.max_iter = cap;
        }
        let r = minimize_lbfgs(self.obj, x0, &cfg)?;
        Ok(Refined {
            point: r.x,
            value: r.value,
            iterations: r.iterations,
            converged: r.converged,
            curvature: None,
            step_hint: None,
        })
    }
}

/// How search directions are generated at a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectionStrategy {
    /// `n` seeded directions uniform on the unit sphere (`None`: dimension).
    Random { n: Option<usize> },
    /// Eigenvectors of the curvature at the solution, both orientations.
    HessianEigenvectors,
}

/// Tier-search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TierConfig {
    /// Ray scan step.
    pub step: f64,
    /// Escape offset beyond the exit point; `None` means `2 * step`.
    pub eps: Option<f64>,
    pub max_evals: usize,
    pub max_tiers: usize,
    pub strategy: DirectionStrategy,
    /// Tier `t >= 1` solutions are expanded only when their value is below
    /// `v0 + (c - 1) * |v0|`, which is `c * v0` for positive `v0`.
    pub prune_factor: f64,
    pub dedup_tol: f64,
    /// Scale the step on coordinate `i` by `max(|x_i|, 0.1)`.
    pub scale_steps: bool,
    /// Use the solver's step hint instead of `step` when it provides one.
    pub use_solver_step: bool,
    /// Cap refinements at twice the iterations of the best solution so far.
    pub dynamic_iter_cap: bool,
    pub seed: u64,
}

impl Default for TierConfig {
    fn default() -> Self {
        Self {
            step: 0.05,
            eps: None,
            max_evals: 500,
            max_tiers: 2,
            strategy: DirectionStrategy::Random { n: None },
            prune_factor: 1.2,
            dedup_tol: 1e-3,
            scale_steps: true,
            use_solver_step: false,
            dynamic_iter_cap: false,
            seed: 0,
        }
    }
}

impl TierConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.dedup_tol > 0.0 && self.prune_factor > 0.0)
            || self.max_evals == 0
            || self.max_tiers == 0
        {
            return Err(Error::Config(
                "tier config needs positive step, dedup_tol, prune_factor, max_evals, max_tiers"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// A stored local minimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    #[serde(with = "crate::dynsys::point_serde")]
    pub point: Point,
    pub value: f64,
    pub tier: usize,
    /// Index of the parent in the owning set; `None` for the root.
    pub parent: Option<usize>,
    pub direction_index: Option<usize>,
    #[serde(with = "crate::dynsys::point_serde::option")]
    pub exit_point: Option<Point>,
    pub iterations: usize,
    #[serde(skip)]
    pub curvature: Option<DMatrix<f64>>,
    #[serde(skip)]
    pub step_hint: Option<f64>,
}

impl Solution {
    fn root(r: Refined) -> Self {
        Self {
            point: r.point,
            value: r.value,
            tier: 0,
            parent: None,
            direction_index: None,
            exit_point: None,
            iterations: r.iterations,
            curvature: r.curvature,
            step_hint: r.step_hint,
        }
    }
}

/// Deduplicated solutions with tier provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionSet {
    pub solutions: Vec<Solution>,
    pub dedup_tol: f64,
}

/// One entry of the tier-tree export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierNode {
    pub tier: usize,
    pub value: f64,
    pub parent: Option<usize>,
    pub direction_index: Option<usize>,
    pub point: Vec<f64>,
}

impl SolutionSet {
    pub fn new(dedup_tol: f64) -> Self {
        Self {
            solutions: Vec::new(),
            dedup_tol,
        }
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// True if some stored point lies within `dedup_tol` of `p`.
    pub fn contains<O: Objective + ?Sized>(&self, obj: &O, p: &Point) -> bool {
        self.solutions
            .iter()
            .any(|s| obj.distance(&s.point, p) < self.dedup_tol)
    }

    /// Stores `sol` unless it duplicates an existing point; returns its index.
    pub fn insert<O: Objective + ?Sized>(&mut self, obj: &O, sol: Solution) -> Option<usize> {
        if self.contains(obj, &sol.point) {
            return None;
        }
        self.solutions.push(sol);
        Some(self.solutions.len() - 1)
    }

    /// Solution with the smallest value.
    pub fn best(&self) -> Option<&Solution> {
        self.solutions.iter().min_by(|a, b| a.value.total_cmp(&b.value))
    }

    /// Sorts by value, then lexicographically by point, remapping parents.
    pub fn sort_canonical(&mut self) {
        let mut order: Vec<usize> = (0..self.solutions.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (&self.solutions[i], &self.solutions[j]);
            a.value.total_cmp(&b.value).then_with(|| {
                a.point
                    .iter()
                    .zip(b.point.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let mut new_index = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut taken: Vec<Option<Solution>> = self.solutions.drain(..).map(Some).collect();
        self.solutions = order
            .iter()
            .map(|&old| {
                let mut s = taken[old].take().expect("each index once");
                s.parent = s.parent.map(|p| new_index[p]);
                s
            })
            .collect();
    }

    /// Tier tree as `{tier, value, parent, direction_index, point}` records.
    pub fn tier_tree(&self) -> Vec<TierNode> {
        self.solutions
            .iter()
            .map(|s| TierNode {
                tier: s.tier,
                value: s.value,
                parent: s.parent,
                direction_index: s.direction_index,
                point: s.point.iter().copied().collect(),
            })
            .collect()
    }

    pub fn write_tier_tree_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.tier_tree())?;
        Ok(())
    }
}

/// Search directions at a solution.
pub fn generate_directions<O: Objective + ?Sized>(
    obj: &O,
    sol: &Solution,
    strategy: DirectionStrategy,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point>> {
    let d = sol.point.len();
    match strategy {
        DirectionStrategy::Random { n } => Ok((0..n.unwrap_or(d))
            .map(|_| random_unit(d, rng))
            .collect()),
        DirectionStrategy::HessianEigenvectors => {
            let h = match &sol.curvature {
                Some(c) => c.clone(),
                None => obj.hessian(&sol.point).ok_or_else(|| {
                    Error::Strategy("no Hessian or curvature available for eigenvectors".into())
                })??,
            };
            let eig = SymmetricEigen::new(h);
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            let mut out = Vec::with_capacity(2 * d);
            for i in idx {
                let v: Point = eig.eigenvectors.column(i).into_owned();
                out.push(v.clone());
                out.push(-v);
            }
            Ok(out)
        }
    }
}

fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> Point {
    loop {
        let v = Point::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Walks `x + k * step * d`, `k = 1, 2, ...` and returns the last point
/// before the first decrease that follows an increase, with the number of
/// evaluations used. Returns `None` after `max_evals` evaluations, or when
/// the ray leaves the objective's domain.
pub fn exit_along<O: Objective + ?Sized>(
    obj: &O,
    x: &Point,
    d: &Point,
    step: f64,
    max_evals: usize,
) -> Result<Option<(Point, usize)>> {
    let mut prev = obj.value(x)?;
    let mut rising = false;
    for k in 1..=max_evals {
        let p = x + d * (k as f64 * step);
        let cur = match obj.value(&p) {
            Ok(v) if v.is_finite() => v,
            Ok(_) | Err(Error::Domain(_)) | Err(Error::InvalidParams(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if cur > prev {
            rising = true;
        } else if rising && cur < prev {
            return Ok(Some((x + d * ((k - 1) as f64 * step), k)));
        }
        prev = cur;
    }
    Ok(None)
}

/// Refines from `exit + eps * d`; `None` if the solver fails, does not
/// converge, or returns to `origin` (within `dedup_tol`).
pub fn escape_refine<O: Objective + ?Sized, S: LocalSolver + ?Sized>(
    obj: &O,
    exit: &Point,
    d: &Point,
    eps: f64,
    solver: &S,
    origin: &Point,
    dedup_tol: f64,
) -> Option<Refined> {
    escape_refine_capped(obj, exit, d, eps, solver, origin, dedup_tol, None)
}

#[allow(clippy::too_many_arguments)]
fn escape_refine_capped<O: Objective + ?Sized, S: LocalSolver + ?Sized>(
    obj: &O,
    exit: &Point,
    d: &Point,
    eps: f64,
    solver: &S,
    origin: &Point,
    dedup_tol: f64,
    cap: Option<usize>,
) -> Option<Refined> {
    let start = exit + d * eps;
    match solver.refine_capped(&start, cap) {
        Ok(r) if !r.converged => {
            debug!("escape refinement did not converge after {} iterations", r.iterations);
            None
        }
        Ok(r) if obj.distance(&r.point, origin) < dedup_tol => None,
        Ok(r) => Some(r),
        Err(e) => {
            debug!("escape refinement failed: {e}");
            None
        }
    }
}

/// A neighbour found from one direction.
#[derive(Debug, Clone)]
pub struct Neighbor {
    pub direction_index: usize,
    pub exit_point: Point,
    pub refined: Refined,
}

/// Explores every direction from `sol` and returns the refined neighbours in
/// direction order. `stream` selects the random stream for direction
/// generation.
pub fn explore<O: Objective + ?Sized, S: LocalSolver + ?Sized>(
    obj: &O,
    sol: &Solution,
    solver: &S,
    cfg: &TierConfig,
    stream: u64,
    cap: Option<usize>,
) -> Result<Vec<Neighbor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let dirs = generate_directions(obj, sol, cfg.strategy, &mut rng)?;
    let step = match (cfg.use_solver_step, sol.step_hint) {
        (true, Some(h)) if h > 0.0 => h,
        _ => cfg.step,
    };
    let eps = cfg.eps.unwrap_or(2.0 * step);
    let found: Vec<Option<Neighbor>> = dirs
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let d = if cfg.scale_steps {
                d.zip_map(&sol.point, |di, xi| di * xi.abs().max(0.1))
            } else {
                d.clone()
            };
            let (exit, _) = match exit_along(obj, &sol.point, &d, step, cfg.max_evals) {
                Ok(Some(e)) => e,
                Ok(None) => return None,
                Err(e) => {
                    debug!("direction {i}: exit search failed: {e}");
                    return None;
                }
            };
            escape_refine_capped(obj, &exit, &d, eps, solver, &sol.point, cfg.dedup_tol, cap).map(
                |refined| Neighbor {
                    direction_index: i,
                    exit_point: exit,
                    refined,
                },
            )
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Tier-by-tier search from `x0`; the returned set is canonically sorted.
pub fn tier_search<O: Objective + ?Sized, S: LocalSolver + ?Sized>(
    obj: &O,
    x0: &Point,
    solver: &S,
    cfg: &TierConfig,
) -> Result<SolutionSet> {
    cfg.validate()?;
    tier_search_from(obj, solver.refine(x0)?, solver, cfg)
}

/// Tier search from an already refined tier-0 solution.
pub fn tier_search_from<O: Objective + ?Sized, S: LocalSolver + ?Sized>(
    obj: &O,
    root: Refined,
    solver: &S,
    cfg: &TierConfig,
) -> Result<SolutionSet> {
    cfg.validate()?;
    let v0 = root.value;
    let threshold = v0 + (cfg.prune_factor - 1.0) * v0.abs();
    let mut set = SolutionSet::new(cfg.dedup_tol);
    set.solutions.push(Solution::root(root));
    let mut frontier = vec![0usize];
    for tier in 0..cfg.max_tiers {
        let mut next = Vec::new();
        for &idx in &frontier {
            let parent = &set.solutions[idx];
            if tier > 0 && !(parent.value < threshold) {
                continue;
            }
            let cap = if cfg.dynamic_iter_cap {
                set.best().map(|b| 2 * b.iterations.max(1))
            } else {
                None
            };
            let parent = parent.clone();
            for nb in explore(obj, &parent, solver, cfg, idx as u64, cap)? {
                let sol = Solution {
                    point: nb.refined.point,
                    value: nb.refined.value,
                    tier: tier + 1,
                    parent: Some(idx),
                    direction_index: Some(nb.direction_index),
                    exit_point: Some(nb.exit_point),
                    iterations: nb.refined.iterations,
                    curvature: nb.refined.curvature,
                    step_hint: nb.refined.step_hint,
                };
                if let Some(i) = set.insert(obj, sol) {
                    next.push(i);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    set.sort_canonical();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::FnObjective;

    fn double_well() -> FnObjective {
        FnObjective::new(
            1,
            |x| (x[0] * x[0] - 1.0).powi(2),
            |x| Point::from_vec(vec![4.0 * x[0] * (x[0] * x[0] - 1.0)]),
        )
    }

    #[test]
    fn exit_along_double_well() {
        let f = double_well();
        let (exit, _) = exit_along(
            &f,
            &Point::from_vec(vec![-1.0]),
            &Point::from_vec(vec![1.0]),
            1e-3,
            5000,
        )
        .unwrap()
        .unwrap();
        assert!(exit[0].abs() < 2e-3);
    }

    #[test]
    fn exit_along_single_basin_none() {
        let f = FnObjective::new(2, |x| x.norm_squared(), |x| x * 2.0);
        let r = exit_along(&f, &Point::zeros(2), &Point::from_vec(vec![1.0, 0.0]), 0.1, 500).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn escape_refine_double_well() {
        let f = double_well();
        let solver = LbfgsSolver::new(&f);
        let origin = Point::from_vec(vec![-1.0]);
        let r = escape_refine(
            &f,
            &Point::zeros(1),
            &Point::from_vec(vec![1.0]),
            0.1,
            &solver,
            &origin,
            1e-3,
        )
        .unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn escape_with_zero_eps_on_exact_exit_is_origin_or_none() {
        // the exit is exactly the local max; the gradient vanishes there and
        // the solver stays put, which is not a new minimum of either basin
        let f = double_well();
        let solver = LbfgsSolver::new(&f);
        let origin = Point::from_vec(vec![-1.0]);
        let r = escape_refine(&f, &Point::zeros(1), &Point::from_vec(vec![1.0]), 0.0, &solver, &origin, 1e-3);
        assert!(r.is_none() || r.unwrap().point[0].abs() < 1e-12);
    }

    #[test]
    fn random_directions_are_unit() {
        let f = double_well();
        let sol = Solution::root(Refined {
            point: Point::zeros(4),
            value: 0.0,
            iterations: 0,
            converged: true,
            curvature: None,
            step_hint: None,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dirs =
            generate_directions(&f, &sol, DirectionStrategy::Random { n: Some(7) }, &mut rng).unwrap();
        assert_eq!(dirs.len(), 7);
        assert!(dirs.iter().all(|d| (d.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn eigen_strategy_axis_aligned_quadratic() {
        let f = FnObjective::new(
            2,
            |x| x[0] * x[0] + 4.0 * x[1] * x[1],
            |x| Point::from_vec(vec![2.0 * x[0], 8.0 * x[1]]),
        )
        .with_hessian(|_| DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]));
        let sol = Solution::root(Refined {
            point: Point::zeros(2),
            value: 0.0,
            iterations: 0,
            converged: true,
            curvature: None,
            step_hint: None,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dirs =
            generate_directions(&f, &sol, DirectionStrategy::HessianEigenvectors, &mut rng).unwrap();
        assert_eq!(dirs.len(), 4);
        for d in &dirs {
            assert!((d[0].abs() - 1.0).abs() < 1e-12 || (d[1].abs() - 1.0).abs() < 1e-12);
        }
        assert_eq!(dirs[0], -dirs[1].clone());
    }

    #[test]
    fn eigen_strategy_without_hessian_errors() {
        let f = double_well();
        let sol = Solution::root(Refined {
            point: Point::zeros(1),
            value: 0.0,
            iterations: 0,
            converged: true,
            curvature: None,
            step_hint: None,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            generate_directions(&f, &sol, DirectionStrategy::HessianEigenvectors, &mut rng),
            Err(Error::Strategy(_))
        ));
    }

    #[test]
    fn single_basin_set_of_one() {
        let f = FnObjective::new(2, |x| x.norm_squared(), |x| x * 2.0);
        let solver = LbfgsSolver::new(&f);
        let set = tier_search(&f, &Point::from_vec(vec![0.3, -0.2]), &solver, &TierConfig::default())
            .unwrap();
        assert_eq!(set.len(), 1);
    }
}
