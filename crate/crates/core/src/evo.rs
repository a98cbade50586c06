//! Evolutionary search with quartet-elitist selection in three variants:
//! Gaussian mutation, local refinement of children, and tier-1 search from
//! children.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Objective, Point};
use crate::error::{Error, Result};
use crate::tiersearch::{tier_search, DirectionStrategy, LocalSolver, TierConfig};

/// How children are perturbed after recombination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvoVariant {
    Mutate,
    LocalRefine,
    TrustTech,
}

impl FromStr for EvoVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mutate" => Ok(Self::Mutate),
            "local_refine" | "local-refine" => Ok(Self::LocalRefine),
            "trust_tech" | "trust-tech" => Ok(Self::TrustTech),
            _ => Err(Error::Config(format!("unknown evolutionary variant {s:?}"))),
        }
    }
}

/// Evolutionary run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoConfig {
    pub pop_size: usize,
    pub generations: usize,
    /// Recombination rounds per generation.
    pub recombinations: usize,
    pub variant: EvoVariant,
    /// Mutation standard deviation as a fraction of each coordinate's span.
    pub sigma: f64,
    pub seed: u64,
    /// Tier search used by [`EvoVariant::TrustTech`]; only one tier is run.
    pub tier: TierConfig,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            pop_size: 10,
            generations: 100,
            recombinations: 10,
            variant: EvoVariant::Mutate,
            sigma: 0.1,
            seed: 0,
            tier: TierConfig {
                max_evals: 100,
                max_tiers: 1,
                scale_steps: false,
                strategy: DirectionStrategy::Random { n: None },
                ..TierConfig::default()
            },
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(Error::Config("population needs at least 2 members".into()));
        }
        if self.recombinations == 0 {
            return Err(Error::Config("recombinations must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("mutation sigma must be positive".into()));
        }
        Ok(())
    }
}

/// A population member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    #[serde(with = "crate::dynsys::point_serde")]
    pub point: Point,
    /// `+inf` where the objective is undefined.
    pub value: f64,
}

impl Individual {
    pub fn evaluate<O: Objective + ?Sized>(obj: &O, point: Point) -> Self {
        let value = obj
            .value(&point)
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::INFINITY);
        Self { point, value }
    }
}

/// Arithmetic blend with `lambda ~ U(0, 1)`.
pub fn recombine<R: Rng + ?Sized>(p1: &Point, p2: &Point, rng: &mut R) -> Result<(Point, Point)> {
    let lambda: f64 = rng.gen();
    blend(p1, p2, lambda)
}

/// `(lambda p1 + (1 - lambda) p2, (1 - lambda) p1 + lambda p2)`.
pub fn blend(p1: &Point, p2: &Point, lambda: f64) -> Result<(Point, Point)> {
    if p1.len() != p2.len() {
        return Err(Error::Dimension {
            expected: p1.len(),
            got: p2.len(),
        });
    }
    Ok((
        p1 * lambda + p2 * (1.0 - lambda),
        p1 * (1.0 - lambda) + p2 * lambda,
    ))
}

/// Shared state of one run.
pub struct EvoContext<'a, O: ?Sized> {
    pub obj: &'a O,
    pub cfg: &'a EvoConfig,
    /// Per-coordinate span used to scale mutations.
    pub spans: Vec<f64>,
    pub solver: Option<&'a dyn LocalSolver>,
}

impl<O: Objective + ?Sized> EvoContext<'_, O> {
    fn perturb<R: Rng + ?Sized>(&self, child: Point, rng: &mut R) -> Result<Individual> {
        match self.cfg.variant {
            EvoVariant::Mutate => {
                let p = Point::from_fn(child.len(), |i, _| {
                    let z: f64 = rng.sample(StandardNormal);
                    child[i] + self.cfg.sigma * self.spans[i] * z
                });
                Ok(Individual::evaluate(self.obj, p))
            }
            EvoVariant::LocalRefine => {
                let r = self.solver()?.refine(&child)?;
                Ok(Individual {
                    point: r.point,
                    value: r.value,
                })
            }
            EvoVariant::TrustTech => {
                let tier = TierConfig {
                    max_tiers: 1,
                    seed: rng.next_u64(),
                    ..self.cfg.tier.clone()
                };
                let set = tier_search(self.obj, &child, self.solver()?, &tier)?;
                let best = set.best().expect("root stored");
                Ok(Individual {
                    point: best.point.clone(),
                    value: best.value,
                })
            }
        }
    }

    fn solver(&self) -> Result<&dyn LocalSolver> {
        self.solver
            .ok_or_else(|| Error::Config("this variant needs a local solver".into()))
    }
}

/// One recombination round: two distinct parents, two perturbed children,
/// and the best two of the four replace the parents.
pub fn select_round<O: Objective + ?Sized, R: Rng + ?Sized>(
    pop: &mut [Individual],
    ctx: &EvoContext<'_, O>,
    rng: &mut R,
) -> Result<()> {
    if pop.len() < 2 {
        return Err(Error::Config("population needs at least 2 members".into()));
    }
    let i = rng.gen_range(0..pop.len());
    let mut j = rng.gen_range(0..pop.len() - 1);
    if j >= i {
        j += 1;
    }
    let (c1, c2) = recombine(&pop[i].point, &pop[j].point, rng)?;
    let c1 = ctx.perturb(c1, rng)?;
    let c2 = ctx.perturb(c2, rng)?;
    let mut quartet = [pop[i].clone(), pop[j].clone(), c1, c2];
    // stable: parents win ties
    quartet.sort_by(|a, b| a.value.total_cmp(&b.value));
    let [first, second, ..] = quartet;
    pop[i] = first;
    pop[j] = second;
    Ok(())
}

/// Per-generation statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_value: f64,
    pub mean_value: f64,
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    GenerationStats {
        generation,
        best_value: pop.iter().map(|p| p.value).fold(f64::INFINITY, f64::min),
        mean_value: pop.iter().map(|p| p.value).sum::<f64>() / pop.len() as f64,
    }
}

/// Outcome of [`ea_run`].
#[derive(Debug, Clone)]
pub struct EvoResult {
    pub best: Individual,
    pub population: Vec<Individual>,
    /// Row 0 describes the initial population.
    pub history: Vec<GenerationStats>,
}

/// Writes `generation,best_value,mean_value` rows.
pub fn write_history_csv<W: Write>(history: &[GenerationStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["generation", "best_value", "mean_value"])?;
    for h in history {
        w.write_record([
            h.generation.to_string(),
            h.best_value.to_string(),
            h.mean_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Uniform initial population inside `bounds`.
pub fn initial_population<O: Objective + ?Sized, R: Rng + ?Sized>(
    obj: &O,
    bounds: &[(f64, f64)],
    size: usize,
    rng: &mut R,
) -> Result<Vec<Individual>> {
    if bounds.len() != obj.dim() {
        return Err(Error::Dimension {
            expected: obj.dim(),
            got: bounds.len(),
        });
    }
    if bounds.iter().any(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
        return Err(Error::Config("bounds must be finite with lo < hi".into()));
    }
    Ok((0..size)
        .map(|_| {
            let p = Point::from_iterator(
                bounds.len(),
                bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)),
            );
            Individual::evaluate(obj, p)
        })
        .collect())
}

/// Runs the evolutionary search from a uniform population in `bounds`.
/// `solver` is required by every variant except [`EvoVariant::Mutate`].
pub fn ea_run<O: Objective + ?Sized>(
    obj: &O,
    cfg: &EvoConfig,
    bounds: &[(f64, f64)],
    solver: Option<&dyn LocalSolver>,
) -> Result<EvoResult> {
    cfg.validate()?;
    if cfg.variant != EvoVariant::Mutate && solver.is_none() {
        return Err(Error::Config(format!(
            "variant {:?} needs a local solver",
            cfg.variant
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop = initial_population(obj, bounds, cfg.pop_size, &mut rng)?;
    let ctx = EvoContext {
        obj,
        cfg,
        spans: bounds.iter().map(|(lo, hi)| hi - lo).collect(),
        solver,
    };
    let mut history = vec![stats(0, &pop)];
    for g in 1..=cfg.generations {
        for _ in 0..cfg.recombinations {
            select_round(&mut pop, &ctx, &mut rng)?;
        }
        history.push(stats(g, &pop));
    }
    let best = pop
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("non-empty population")
        .clone();
    Ok(EvoResult {
        best,
        population: pop,
        history,
    })
}

/// Two-dimensional multi-well benchmark
/// `f(x) = 20 + sum_i (x_i^2 - 10 cos(2 pi x_i))` on `[-5.12, 5.12]^2`,
/// with a local minimum near every integer lattice point and the global
/// minimum 0 at the origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct MultiWell;

impl MultiWell {
    pub const BOUNDS: [(f64, f64); 2] = [(-5.12, 5.12), (-5.12, 5.12)];
}

impl Objective for MultiWell {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Point) -> Result<f64> {
        crate::dynsys::check_dim(2, x)?;
        let tau = 2.0 * std::f64::consts::PI;
        Ok(20.0 + x.iter().map(|v| v * v - 10.0 * (tau * v).cos()).sum::<f64>())
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        crate::dynsys::check_dim(2, x)?;
        let tau = 2.0 * std::f64::consts::PI;
        Ok(x.map(|v| 2.0 * v + 10.0 * tau * (tau * v).sin()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiersearch::LbfgsSolver;

    fn pt(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    #[test]
    fn half_blend_is_midpoint() {
        let (a, b) = blend(&pt(&[0.0, 2.0]), &pt(&[4.0, -2.0]), 0.5).unwrap();
        assert_eq!(a, pt(&[2.0, 0.0]));
        assert_eq!(b, a);
    }

    #[test]
    fn blend_conserves_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (p1, p2) = (pt(&[1.0, -3.0, 0.5]), pt(&[-2.0, 4.0, 7.0]));
        let (c1, c2) = recombine(&p1, &p2, &mut rng).unwrap();
        assert!((&c1 + &c2 - (&p1 + &p2)).amax() < 1e-12);
        assert!(recombine(&p1, &pt(&[1.0]), &mut rng).is_err());
    }

    #[test]
    fn worse_children_leave_parents() {
        // mutation so large the children land far uphill
        let cfg = EvoConfig {
            sigma: 1e3,
            ..EvoConfig::default()
        };
        let ctx = EvoContext {
            obj: &MultiWell,
            cfg: &cfg,
            spans: vec![10.0, 10.0],
            solver: None,
        };
        let mut pop = vec![
            Individual::evaluate(&MultiWell, pt(&[0.0, 0.0])),
            Individual::evaluate(&MultiWell, pt(&[1e-3, 0.0])),
        ];
        let before = pop.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        select_round(&mut pop, &ctx, &mut rng).unwrap();
        let mut a: Vec<f64> = before.iter().map(|p| p.value).collect();
        let mut b: Vec<f64> = pop.iter().map(|p| p.value).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_generations_returns_initial_best() {
        let cfg = EvoConfig {
            generations: 0,
            seed: 9,
            ..EvoConfig::default()
        };
        let r = ea_run(&MultiWell, &cfg, &MultiWell::BOUNDS, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let init = initial_population(&MultiWell, &MultiWell::BOUNDS, 10, &mut rng).unwrap();
        let best = init.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.value, best);
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn refine_variant_requires_solver() {
        let cfg = EvoConfig {
            variant: EvoVariant::LocalRefine,
            ..EvoConfig::default()
        };
        assert!(matches!(
            ea_run(&MultiWell, &cfg, &MultiWell::BOUNDS, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn refined_survivors_are_stationary() {
        let solver = LbfgsSolver::new(&MultiWell);
        let cfg = EvoConfig {
            variant: EvoVariant::LocalRefine,
            generations: 5,
            seed: 2,
            ..EvoConfig::default()
        };
        let r = ea_run(&MultiWell, &cfg, &MultiWell::BOUNDS, Some(&solver)).unwrap();
        let init = {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            initial_population(&MultiWell, &MultiWell::BOUNDS, 10, &mut rng).unwrap()
        };
        for p in r.population.iter().filter(|p| !init.contains(p)) {
            assert!(MultiWell.gradient(&p.point).unwrap().norm() < 1e-4);
        }
    }

    #[test]
    fn variant_names_parse() {
        assert_eq!("trust-tech".parse::<EvoVariant>().unwrap(), EvoVariant::TrustTech);
        assert!("ga".parse::<EvoVariant>().is_err());
    }

    #[test]
    fn history_csv_header() {
        let mut buf = Vec::new();
        let h = [GenerationStats {
            generation: 0,
            best_value: 1.5,
            mean_value: 2.0,
        }];
        write_history_csv(&h, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "generation,best_value,mean_value\n0,1.5,2\n");
    }
}
