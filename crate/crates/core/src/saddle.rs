//! Saddle search by stability-boundary following.
//!
//! Given two local minima `A` and `B`, [`locate_ddp`] runs three stages:
//!
//! 1. [`find_exit_point`]: coarse scan of `f` along `A -> B`, then a
//!    golden-section bracket around the first value drop. This gives the
//!    exit point where the segment leaves `A`'s basin.
//! 2. [`follow_boundary`]: alternate short Euler integration with a retrace
//!    scan that pulls the point back onto the boundary. It stops at the first
//!    rise of the gradient norm after a fall, and that point is the
//!    minimum-gradient point (MGP).
//! 3. [`newton_critical`](crate::solvers::newton_critical) from the MGP. The
//!    result must have exactly one negative Hessian eigenvalue.
//!
//! [`symmetric_ddp`] handles exits that are exact by symmetry.
//! [`perturbed_escape`] handles exits that are themselves critical (sources).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynsys::{
    classify_critical, euler_step, grad_norm, CriticalClass, CriticalKind, Counted, Objective,
    Point,
};
use crate::error::{Error, Result};
use crate::solvers::{newton_critical, try_golden_section_peak};

/// Tuning of the saddle pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaddleConfig {
    /// Intervals of the initial exit-point scan.
    pub coarse_steps: usize,
    /// Golden-section bracket accuracy.
    pub eps: f64,
    /// Euler step size.
    pub dt: f64,
    /// Euler steps per boundary hop.
    pub intsteps: usize,
    /// Intervals of each retrace scan.
    pub smallstep: usize,
    pub max_hops: usize,
    /// Newton gradient tolerance for the refined saddle.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Gradient tolerance for accepting a point as critical when classifying.
    pub critical_tol: f64,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        Self {
            coarse_steps: 10,
            eps: 1e-6,
            dt: 1e-4,
            intsteps: 20,
            smallstep: 50,
            max_hops: 1000,
            newton_tol: 1e-10,
            newton_max_iter: 100,
            critical_tol: 1e-8,
        }
    }
}

impl SaddleConfig {
    fn validate(&self) -> Result<()> {
        if self.coarse_steps == 0
            || self.intsteps == 0
            || self.smallstep == 0
            || self.max_hops == 0
            || !(self.eps > 0.0 && self.dt > 0.0 && self.newton_tol > 0.0)
        {
            return Err(Error::Config("saddle config values must be positive".into()));
        }
        Ok(())
    }
}

/// One recorded boundary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    #[serde(with = "crate::dynsys::point_serde")]
    pub point: Point,
    pub grad_norm: f64,
}

/// How a boundary trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    /// Gradient norm rose after falling; the MGP is the point before the rise.
    MgpFound,
    /// `max_hops` reached; the MGP is the smallest-gradient point seen.
    HopLimit,
    /// A retrace scan found no peak in either direction.
    BoundaryLost,
}

/// Sequence of boundary points visited by [`follow_boundary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub points: Vec<TracePoint>,
    pub mgp_index: usize,
    pub status: TraceStatus,
}

impl BoundaryTrace {
    pub fn mgp(&self) -> &TracePoint {
        &self.points[self.mgp_index]
    }

    /// Writes `hop_index, x1..xd, grad_norm` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.points.first().map_or(0, |p| p.point.len());
        let mut header = vec!["hop_index".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        header.push("grad_norm".into());
        w.write_record(&header)?;
        for (i, tp) in self.points.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(tp.point.iter().map(|v| v.to_string()));
            row.push(tp.grad_norm.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full output of [`locate_ddp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleResult {
    #[serde(with = "crate::dynsys::point_serde")]
    pub exit_point: Point,
    pub boundary_trace: BoundaryTrace,
    #[serde(with = "crate::dynsys::point_serde")]
    pub mgp: Point,
    pub mgp_grad_norm: f64,
    #[serde(with = "crate::dynsys::point_serde")]
    pub ddp: Point,
    pub ddp_energy: f64,
    pub ddp_class: CriticalClass,
    /// Gradient evaluations up to and including MGP detection.
    pub force_evals: usize,
    /// Energy evaluations up to MGP detection.
    pub energy_evals: usize,
}

/// Scans `obj` along `a -> b` in `steps` intervals and returns the peak.
///
/// If the first interval already descends, the scan direction is reversed
/// (`b <- 2a - b`). On the first drop at interval `i` the peak is refined by
/// golden section over `[a_{i-2}, a_i]`. Returns `None` when the scan
/// decreases nowhere or leaves the objective's domain first.
pub fn find_exit_point<O: Objective + ?Sized>(
    obj: &O,
    a: &Point,
    b: &Point,
    steps: usize,
    eps: f64,
) -> Result<Option<Point>> {
    if steps == 0 {
        return Err(Error::Config("steps must be positive".into()));
    }
    let mut interval = (b - a) / steps as f64;
    if interval.norm() == 0.0 {
        return Ok(None);
    }
    let f0 = obj.value(a)?;
    match in_domain(obj.value(&(a + &interval)))? {
        Some(f1) if f1 >= f0 => {}
        _ => interval = -interval,
    }
    let mut prev = f0;
    for i in 1..=steps {
        let Some(cur) = in_domain(obj.value(&(a + &interval * i as f64)))? else {
            return Ok(None);
        };
        if prev > cur {
            let lo = a + &interval * (i as f64 - 2.0);
            let span = &interval * 2.0;
            let len = span.norm();
            let t = try_golden_section_peak(|t| obj.value(&(&lo + &span * t)), 0.0, 1.0, eps / len)?;
            return Ok(Some(lo + span * t));
        }
        prev = cur;
    }
    Ok(None)
}

/// Maps a domain error to `None` so scans stop at the domain edge.
fn in_domain(v: Result<f64>) -> Result<Option<f64>> {
    match v {
        Ok(v) => Ok(Some(v)),
        Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn retrace<O: Objective + ?Sized>(
    obj: &O,
    from: &Point,
    a: &Point,
    b: &Point,
    cfg: &SaddleConfig,
) -> Result<Option<Point>> {
    if let Some(p) = find_exit_point(obj, from, b, cfg.smallstep, cfg.eps)? {
        return Ok(Some(p));
    }
    find_exit_point(obj, from, a, cfg.smallstep, cfg.eps)
}

/// Traces the stability boundary between the basins of `a` and `b` from an
/// exit point until the gradient norm rises after having fallen.
pub fn follow_boundary<O: Objective + ?Sized>(
    obj: &O,
    exit: &Point,
    a: &Point,
    b: &Point,
    cfg: &SaddleConfig,
) -> Result<BoundaryTrace> {
    cfg.validate()?;
    let mut bd = exit.clone();
    let mut gm_next = grad_norm(obj, &bd)?;
    let mut points = vec![TracePoint {
        point: bd.clone(),
        grad_norm: gm_next,
    }];
    let mut reduce_flag = false;
    let best = |pts: &[TracePoint]| {
        pts.iter()
            .enumerate()
            .min_by(|x, y| x.1.grad_norm.total_cmp(&y.1.grad_norm))
            .map_or(0, |(i, _)| i)
    };
    for _ in 0..cfg.max_hops {
        let mut moved = bd.clone();
        for _ in 0..cfg.intsteps {
            moved = euler_step(obj, &moved, cfg.dt)?;
        }
        let Some(next) = retrace(obj, &moved, a, b, cfg)? else {
            let mgp_index = best(&points);
            return Ok(BoundaryTrace {
                points,
                mgp_index,
                status: TraceStatus::BoundaryLost,
            });
        };
        bd = next;
        let gm_prev = gm_next;
        gm_next = grad_norm(obj, &bd)?;
        points.push(TracePoint {
            point: bd.clone(),
            grad_norm: gm_next,
        });
        if gm_next < gm_prev {
            reduce_flag = true;
        }
        if gm_next > gm_prev && reduce_flag {
            let mgp_index = points.len() - 2;
            return Ok(BoundaryTrace {
                points,
                mgp_index,
                status: TraceStatus::MgpFound,
            });
        }
    }
    let mgp_index = best(&points);
    Ok(BoundaryTrace {
        points,
        mgp_index,
        status: TraceStatus::HopLimit,
    })
}

fn refine_saddle<O: Objective + ?Sized>(
    obj: &O,
    exit_point: Point,
    trace: BoundaryTrace,
    force_evals: usize,
    energy_evals: usize,
    cfg: &SaddleConfig,
) -> Result<SaddleResult> {
    let mgp = trace.mgp().point.clone();
    let mgp_grad_norm = trace.mgp().grad_norm;
    let ddp = newton_critical(obj, &mgp, cfg.newton_tol, cfg.newton_max_iter)?;
    let ddp_class = classify_critical(obj, &ddp, cfg.critical_tol)?;
    if ddp_class.kind != CriticalKind::Saddle {
        return Err(Error::WrongIndex {
            negative: ddp_class.negative_eigenvalues,
        });
    }
    Ok(SaddleResult {
        exit_point,
        boundary_trace: trace,
        mgp,
        mgp_grad_norm,
        ddp_energy: obj.value(&ddp)?,
        ddp,
        ddp_class,
        force_evals,
        energy_evals,
    })
}

/// Locates the saddle (dynamic decomposition point) between minima `a`, `b`.
pub fn locate_ddp<O: Objective + ?Sized>(
    obj: &O,
    a: &Point,
    b: &Point,
    cfg: &SaddleConfig,
) -> Result<SaddleResult> {
    cfg.validate()?;
    let counted = Counted::new(obj);
    let exit = find_exit_point(&counted, a, b, cfg.coarse_steps, cfg.eps)?
        .ok_or(Error::NoExitPoint)?;
    let trace = follow_boundary(&counted, &exit, a, b, cfg)?;
    let (fe, ee) = (counted.gradient_evals(), counted.value_evals());
    refine_saddle(obj, exit, trace, fe, ee, cfg)
}

/// Integrates the gradient flow from an exact exit point until the gradient
/// norm drops below `tol`.
///
/// An exit that is not exactly on the boundary drifts into a basin, which is
/// reported as [`Error::FellIntoBasin`].
pub fn symmetric_ddp<O: Objective + ?Sized>(
    obj: &O,
    exit: &Point,
    dt: f64,
    max_steps: usize,
    tol: f64,
) -> Result<Point> {
    let mut x = exit.clone();
    for _ in 0..=max_steps {
        let gn = grad_norm(obj, &x)?;
        if gn < tol {
            let class = classify_critical(obj, &x, tol)?;
            if class.kind == CriticalKind::Stable {
                return Err(Error::FellIntoBasin);
            }
            return Ok(x);
        }
        x = euler_step(obj, &x, dt)?;
    }
    Err(Error::NoConvergence {
        iterations: max_steps,
        grad_norm: grad_norm(obj, &x)?,
        last: x,
    })
}

/// Unit vector orthogonal to `u`, built from the coordinate axis least
/// aligned with it.
pub fn orthogonal_direction(u: &Point) -> Result<Point> {
    let n = u.norm();
    if u.len() < 2 || n == 0.0 {
        return Err(Error::DegenerateExit(
            "no orthogonal direction for a zero or one-dimensional segment".into(),
        ));
    }
    let u = u / n;
    let k = (0..u.len())
        .min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs()))
        .expect("non-empty");
    let mut e = Point::zeros(u.len());
    e[k] = 1.0;
    let v = &e - &u * u[k];
    Ok(&v / v.norm())
}

/// Boundary traces started from `exit +- delta * n`, with `n` orthogonal to
/// `a -> b`. See [`perturbed_escape_along`].
pub fn perturbed_escape<O: Objective + ?Sized>(
    obj: &O,
    exit: &Point,
    a: &Point,
    b: &Point,
    delta: f64,
    cfg: &SaddleConfig,
) -> Result<[BoundaryTrace; 2]> {
    let n = orthogonal_direction(&(b - a))?;
    perturbed_escape_along(obj, exit, a, b, &n, delta, cfg)
}

/// Boundary traces started from `exit +- delta * dir` (unit `dir`).
///
/// Each start must remain a maximum of `f` along the `a -> b` line (probe
/// offset `delta`); a start that is not has left the boundary and yields
/// [`Error::FellIntoBasin`].
pub fn perturbed_escape_along<O: Objective + ?Sized>(
    obj: &O,
    exit: &Point,
    a: &Point,
    b: &Point,
    dir: &Point,
    delta: f64,
    cfg: &SaddleConfig,
) -> Result<[BoundaryTrace; 2]> {
    Ok([
        perturbed_side(obj, exit, a, b, dir, delta, cfg)?,
        perturbed_side(obj, exit, a, b, &(-dir), delta, cfg)?,
    ])
}

fn perturbed_side<O: Objective + ?Sized>(
    obj: &O,
    exit: &Point,
    a: &Point,
    b: &Point,
    dir: &Point,
    delta: f64,
    cfg: &SaddleConfig,
) -> Result<BoundaryTrace> {
    if !(delta.abs() > 0.0) {
        return Err(Error::DegenerateExit("perturbation delta is zero".into()));
    }
    let ab = b - a;
    let u = &ab / ab.norm();
    let start = exit + dir * (delta / dir.norm());
    let f0 = obj.value(&start)?;
    let fp = obj.value(&(&start + &u * delta))?;
    let fm = obj.value(&(&start - &u * delta))?;
    if !(fp < f0 && fm < f0) {
        return Err(Error::FellIntoBasin);
    }
    follow_boundary(obj, &start, a, b, cfg)
}

/// Exit point, perturbed traces and Newton refinement for an exit that is a
/// source; yields one saddle per side.
pub fn locate_ddp_perturbed<O: Objective + ?Sized>(
    obj: &O,
    a: &Point,
    b: &Point,
    delta: f64,
    cfg: &SaddleConfig,
) -> Result<Vec<SaddleResult>> {
    cfg.validate()?;
    let exit = find_exit_point(obj, a, b, cfg.coarse_steps, cfg.eps)?.ok_or(Error::NoExitPoint)?;
    let n = orthogonal_direction(&(b - a))?;
    let mut out = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let counted = Counted::new(obj);
        let trace = perturbed_side(&counted, &exit, a, b, &(&n * sign), delta, cfg)?;
        let (fe, ee) = (counted.gradient_evals(), counted.value_evals());
        out.push(refine_saddle(obj, exit.clone(), trace, fe, ee, cfg)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::newton_critical;
    use crate::surfaces::{reference as r, Eckhardt, MullerBrown};

    fn p(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    fn mb_minimum(x: [f64; 2]) -> Point {
        newton_critical(&MullerBrown::new(), &p(&x), 1e-12, 50).unwrap()
    }

    fn eck_cfg() -> SaddleConfig {
        SaddleConfig {
            dt: 1e-2,
            ..SaddleConfig::default()
        }
    }

    #[test]
    fn exit_points_on_reference_segments() {
        let mb = MullerBrown::new();
        let cfg = SaddleConfig::default();
        let e = find_exit_point(&mb, &p(&r::MB_SEP_A), &p(&r::MB_SEP_B), 10, cfg.eps)
            .unwrap()
            .unwrap();
        assert!((&e - p(&r::MB_EXIT_AB)).amax() < 1e-2, "{e}");
        let e = find_exit_point(&mb, &p(&r::MB_SEP_B), &p(&r::MB_SEP_C), 10, cfg.eps)
            .unwrap()
            .unwrap();
        assert!((&e - p(&r::MB_EXIT_BC)).amax() < 1e-2, "{e}");
        let eck = Eckhardt::new();
        let e = find_exit_point(&eck, &p(&r::ECK_SEP_A), &p(&r::ECK_SEP_B), 10, cfg.eps)
            .unwrap()
            .unwrap();
        assert!(e.amax() < 1e-3, "{e}");
    }

    #[test]
    fn exit_value_exceeds_both_minima() {
        let mb = MullerBrown::new();
        let (a, b) = (mb_minimum(r::MB_SEP_A), mb_minimum(r::MB_SEP_B));
        let e = find_exit_point(&mb, &a, &b, 10, 1e-6).unwrap().unwrap();
        let fe = mb.value(&e).unwrap();
        assert!(fe > mb.value(&a).unwrap() && fe > mb.value(&b).unwrap());
    }

    #[test]
    fn single_well_has_no_exit() {
        let f = crate::dynsys::FnObjective::new(2, |x| x.norm_squared(), |x| x * 2.0);
        let got = find_exit_point(&f, &Point::zeros(2), &p(&[1.0, 1.0]), 10, 1e-6).unwrap();
        assert!(got.is_none());
    }

    #[test]
    fn muller_brown_pipeline_ab() {
        let mb = MullerBrown::new();
        let (a, b) = (mb_minimum(r::MB_SEP_A), mb_minimum(r::MB_SEP_B));
        let cfg = SaddleConfig::default();
        let res = locate_ddp(&mb, &a, &b, &cfg).unwrap();
        assert_eq!(res.boundary_trace.status, TraceStatus::MgpFound);
        assert!((&res.ddp - p(&r::MB_DDP_AB)).amax() < 1e-2);
        assert!((res.ddp_energy - r::MB_ENERGY_DDP_AB).abs() < 0.1);
        assert_eq!(res.ddp_class.negative_eigenvalues, 1);
        assert!(grad_norm(&mb, &res.ddp).unwrap() < 1e-8);
        let rmsd = (&res.mgp - &res.ddp).norm() / (res.ddp.len() as f64).sqrt();
        assert!(rmsd < 0.1);
        let min = res
            .boundary_trace
            .points
            .iter()
            .map(|t| t.grad_norm)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(res.mgp_grad_norm, min);
    }

    #[test]
    fn muller_brown_bc_terminates_quickly() {
        let mb = MullerBrown::new();
        let (b, c) = (mb_minimum(r::MB_SEP_B), mb_minimum(r::MB_SEP_C));
        let res = locate_ddp(&mb, &b, &c, &SaddleConfig::default()).unwrap();
        assert!(res.boundary_trace.points.len() <= 20);
        assert!((res.ddp_energy - r::MB_ENERGY_DDP_BC).abs() < 0.1);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let mb = MullerBrown::new();
        let (a, b) = (mb_minimum(r::MB_SEP_A), mb_minimum(r::MB_SEP_B));
        let cfg = SaddleConfig::default();
        let x = locate_ddp(&mb, &a, &b, &cfg).unwrap();
        let y = locate_ddp(&mb, &a, &b, &cfg).unwrap();
        assert_eq!(x.ddp, y.ddp);
        assert_eq!(x.boundary_trace, y.boundary_trace);
        assert_eq!(x.force_evals, y.force_evals);
    }

    #[test]
    fn inexact_exit_falls_into_basin() {
        let mb = MullerBrown::new();
        let (a, b) = (mb_minimum(r::MB_SEP_A), mb_minimum(r::MB_SEP_B));
        let e = find_exit_point(&mb, &a, &b, 10, 1e-6).unwrap().unwrap();
        let got = symmetric_ddp(&mb, &e, 1e-4, 1_000_000, 1e-6);
        assert!(matches!(got, Err(Error::FellIntoBasin)), "{got:?}");
    }

    #[test]
    fn symmetric_ddp_at_saddle_returns_immediately() {
        let mb = MullerBrown::new();
        let s = newton_critical(&mb, &p(&r::MB_DDP_AB), 1e-12, 50).unwrap();
        assert_eq!(symmetric_ddp(&mb, &s, 1e-4, 0, 1e-8).unwrap(), s);
    }

    #[test]
    fn eckhardt_perturbed_pair() {
        let eck = Eckhardt::new();
        let res = locate_ddp_perturbed(
            &eck,
            &p(&r::ECK_SEP_A),
            &p(&r::ECK_SEP_B),
            1e-2,
            &eck_cfg(),
        )
        .unwrap();
        let mut ys: Vec<f64> = res.iter().map(|s| s.ddp[1]).collect();
        ys.sort_by(f64::total_cmp);
        assert!((ys[0] + r::ECK_DDP_Y).abs() < 1e-3 && (ys[1] - r::ECK_DDP_Y).abs() < 1e-3);
        for s in &res {
            assert!(s.ddp[0].abs() < 1e-3);
            assert!((s.ddp_energy - r::ECK_ENERGY_DDP).abs() < 1e-3);
            assert!((&s.mgp - &s.ddp).norm() / 2f64.sqrt() < 0.1);
        }
    }

    #[test]
    fn zero_delta_is_degenerate() {
        let eck = Eckhardt::new();
        let (a, b) = (p(&r::ECK_SEP_A), p(&r::ECK_SEP_B));
        let got = perturbed_escape(&eck, &Point::zeros(2), &a, &b, 0.0, &eck_cfg());
        assert!(matches!(got, Err(Error::DegenerateExit(_))));
    }

    #[test]
    fn perturbing_along_segment_falls_into_basin() {
        let eck = Eckhardt::new();
        let (a, b) = (p(&r::ECK_SEP_A), p(&r::ECK_SEP_B));
        let got = perturbed_escape_along(
            &eck,
            &Point::zeros(2),
            &a,
            &b,
            &p(&[1.0, 0.0]),
            1e-2,
            &eck_cfg(),
        );
        assert!(matches!(got, Err(Error::FellIntoBasin)));
    }

    #[test]
    fn orthogonal_direction_is_unit_and_orthogonal() {
        let u = p(&[0.3, -2.0, 1.0]);
        let n = orthogonal_direction(&u).unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-12);
        assert!(n.dot(&u).abs() < 1e-12);
        assert!(orthogonal_direction(&p(&[1.0])).is_err());
    }

    #[test]
    fn trace_csv_header() {
        let trace = BoundaryTrace {
            points: vec![TracePoint {
                point: p(&[1.0, 2.0]),
                grad_norm: 0.5,
            }],
            mgp_index: 0,
            status: TraceStatus::MgpFound,
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "hop_index,x1,x2,grad_norm\n0,1,2,0.5\n");
    }

    #[test]
    fn zero_config_values_rejected() {
        let mb = MullerBrown::new();
        let cfg = SaddleConfig {
            intsteps: 0,
            ..SaddleConfig::default()
        };
        let (a, b) = (p(&r::MB_SEP_A), p(&r::MB_SEP_B));
        assert!(matches!(locate_ddp(&mb, &a, &b, &cfg), Err(Error::Config(_))));
    }
}
