//! Local solvers shared by the higher-level algorithms.
//!
//! - [`golden_section_peak`]: bracket maximization with the `r = 0.38197`
//!   shrink schedule.
//! - [`newton_critical`]: damped Newton on `grad f = 0`; converges to critical
//!   points of any index.
//! - [`levenberg_marquardt`]: damped Gauss-Newton least squares that also
//!   returns `J^T J` at the solution.
//! - [`minimize_lbfgs`]: limited-memory BFGS minimizer used as the default
//!   local solver on energy surfaces.

use std::collections::VecDeque;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynsys::{hessian_or_fd, Objective, Point};
use crate::error::{Error, Result};

/// Golden-section shrink ratio.
pub const GOLDEN_R: f64 = 0.38197;

/// Maximizes `f` over `[a, b]`; see [`try_golden_section_peak`].
pub fn golden_section_peak(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    try_golden_section_peak(|t| Ok(f(t)), a, b, eps).expect("infallible")
}

/// Maximizes a fallible `f` over `[a, b]`.
///
/// Keeps the sub-interval holding the larger of the two interior probes until
/// the bracket is at most `eps` wide, then returns the right end. A bracket
/// already narrower than `eps` returns `b` without evaluating `f`.
pub fn try_golden_section_peak(
    mut f: impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    eps: f64,
) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    if !((b - a).abs() > eps) {
        return Ok(b);
    }
    let mut c = a + GOLDEN_R * (b - a);
    let mut d = b - GOLDEN_R * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > eps {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = a + GOLDEN_R * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = b - GOLDEN_R * (b - a);
            fd = f(d)?;
        }
        // the truncated ratio lets the reused probe drift past its partner
        if !(c < d) {
            c = a + GOLDEN_R * (b - a);
            d = b - GOLDEN_R * (b - a);
            fc = f(c)?;
            fd = f(d)?;
        }
    }
    Ok(b)
}

/// Settings for [`newton_critical_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed per iteration before giving up.
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            max_halvings: 40,
        }
    }
}

/// Damped Newton iteration on `grad f = 0` with default halving budget.
pub fn newton_critical<O: Objective + ?Sized>(
    obj: &O,
    x0: &Point,
    tol: f64,
    max_iter: usize,
) -> Result<Point> {
    newton_critical_with(
        obj,
        x0,
        &NewtonConfig {
            tol,
            max_iter,
            ..NewtonConfig::default()
        },
    )
}

/// Damped Newton iteration on `grad f = 0`.
///
/// The full step `-H^{-1} g` is halved until the gradient norm decreases.
pub fn newton_critical_with<O: Objective + ?Sized>(
    obj: &O,
    x0: &Point,
    cfg: &NewtonConfig,
) -> Result<Point> {
    let mut x = x0.clone();
    let mut g = obj.gradient(&x)?;
    let mut gn = g.norm();
    for _ in 0..cfg.max_iter {
        if gn < cfg.tol {
            return Ok(x);
        }
        let h = hessian_or_fd(obj, &x)?;
        let step = h
            .lu()
            .solve(&(-&g))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singularity("Hessian is singular".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let xn = &x + &step * t;
            if let Ok(gnew) = obj.gradient(&xn) {
                let nn = gnew.norm();
                if nn.is_finite() && nn < gn {
                    x = xn;
                    g = gnew;
                    gn = nn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if gn < cfg.tol {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        grad_norm: gn,
        last: x,
    })
}

/// Levenberg-Marquardt settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub mu0: f64,
    pub mu_scale: f64,
    pub tol_grad: f64,
    pub tol_step: f64,
    pub max_iter: usize,
    /// Damping beyond which a failed linear solve is a stall.
    pub mu_max: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            mu0: 1e-3,
            mu_scale: 10.0,
            tol_grad: 1e-10,
            tol_step: 1e-12,
            max_iter: 500,
            mu_max: 1e12,
        }
    }
}

impl LmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.mu_scale > 1.0 && self.tol_grad > 0.0 && self.tol_step > 0.0)
        {
            return Err(Error::Config(
                "LM needs mu0, tol_grad, tol_step > 0 and mu_scale > 1".into(),
            ));
        }
        Ok(())
    }
}

/// Why Levenberg-Marquardt stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmStop {
    Gradient,
    Step,
    MaxIter,
    Observer,
}

/// Outcome of a Levenberg-Marquardt run.
#[derive(Debug, Clone)]
pub struct LmResult {
    pub w: DVector<f64>,
    /// `0.5 * ||e||^2` at `w`.
    pub cost: f64,
    /// Gauss-Newton matrix `J^T J` at `w`.
    pub jtj: DMatrix<f64>,
    /// Norm of `J^T e` at `w`.
    pub grad_norm: f64,
    pub iterations: usize,
    /// Cost after each accepted step, starting with the initial cost.
    pub accepted_costs: Vec<f64>,
    /// Mean length of accepted steps (0 when none was taken).
    pub mean_step: f64,
    pub stop: LmStop,
}

impl LmResult {
    /// True when a gradient or step tolerance ended the run.
    pub fn converged(&self) -> bool {
        matches!(self.stop, LmStop::Gradient | LmStop::Step)
    }
}

/// Minimizes `0.5 * ||r(w)||^2` from `w0`.
pub fn levenberg_marquardt(
    residuals: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    jac: impl Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
    w0: &DVector<f64>,
    cfg: &LmConfig,
) -> Result<LmResult> {
    levenberg_marquardt_observed(residuals, jac, w0, cfg, |_, _| false)
}

/// [`levenberg_marquardt`] with an observer called after every accepted step;
/// returning `true` stops the run (used for early stopping).
pub fn levenberg_marquardt_observed(
    residuals: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    jac: impl Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
    w0: &DVector<f64>,
    cfg: &LmConfig,
    mut observer: impl FnMut(usize, &DVector<f64>) -> bool,
) -> Result<LmResult> {
    cfg.validate()?;
    let mut w = w0.clone();
    let mut e = residuals(&w)?;
    let mut j = jac(&w)?;
    if cfg!(debug_assertions) {
        debug_check_jacobian(&residuals, &j, &w)?;
    }
    let mut cost = 0.5 * e.norm_squared();
    let mut mu = cfg.mu0;
    let mut accepted_costs = vec![cost];
    let mut step_sum = 0.0;
    let mut steps = 0usize;
    let mut stop = LmStop::MaxIter;
    let mut iterations = 0;
    let n = w.len();

    'outer: while iterations < cfg.max_iter {
        let g = j.transpose() * &e;
        if g.norm() < cfg.tol_grad {
            stop = LmStop::Gradient;
            break;
        }
        let jtj = j.transpose() * &j;
        iterations += 1;
        loop {
            let damped = &jtj + DMatrix::identity(n, n) * mu;
            let delta = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    if mu >= cfg.mu_max {
                        return Err(Error::Stall(format!(
                            "Cholesky failed at damping {mu:e}"
                        )));
                    }
                    mu *= cfg.mu_scale;
                    continue;
                }
            };
            if delta.norm() <= cfg.tol_step * (w.norm() + cfg.tol_step) {
                stop = LmStop::Step;
                break 'outer;
            }
            let w_new = &w + &delta;
            let trial = residuals(&w_new).ok().filter(|r| r.iter().all(|v| v.is_finite()));
            match trial {
                Some(e_new) if 0.5 * e_new.norm_squared() < cost => {
                    step_sum += delta.norm();
                    steps += 1;
                    w = w_new;
                    e = e_new;
                    cost = 0.5 * e.norm_squared();
                    j = jac(&w)?;
                    accepted_costs.push(cost);
                    mu = (mu / cfg.mu_scale).max(f64::MIN_POSITIVE);
                    if observer(iterations, &w) {
                        stop = LmStop::Observer;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    mu *= cfg.mu_scale;
                    if !mu.is_finite() {
                        return Err(Error::Stall("damping overflowed".into()));
                    }
                }
            }
        }
    }
    let jtj = j.transpose() * &j;
    let grad_norm = (j.transpose() * &e).norm();
    Ok(LmResult {
        w,
        cost,
        jtj,
        grad_norm,
        iterations,
        accepted_costs,
        mean_step: if steps > 0 { step_sum / steps as f64 } else { 0.0 },
        stop,
    })
}

fn debug_check_jacobian(
    residuals: &impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    j: &DMatrix<f64>,
    w: &DVector<f64>,
) -> Result<()> {
    let mut probe = w.clone();
    for c in 0..w.len() {
        let h = 1e-6 * w[c].abs().max(1.0);
        probe[c] = w[c] + h;
        let rp = residuals(&probe)?;
        probe[c] = w[c] - h;
        let rm = residuals(&probe)?;
        probe[c] = w[c];
        let fd = (rp - rm) / (2.0 * h);
        for r in 0..fd.len() {
            let err = (fd[r] - j[(r, c)]).abs();
            debug_assert!(
                err <= 1e-4 * (1.0 + j[(r, c)].abs()),
                "Jacobian entry ({r}, {c}) = {} disagrees with finite difference {}",
                j[(r, c)],
                fd[r]
            );
        }
    }
    Ok(())
}

/// L-BFGS settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    /// History length.
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 8,
            grad_tol: 1e-8,
            max_iter: 5000,
        }
    }
}

/// Result of a local minimization.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Point,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `obj` from `x0` by L-BFGS with Armijo backtracking.
pub fn minimize_lbfgs<O: Objective + ?Sized>(
    obj: &O,
    x0: &Point,
    cfg: &LbfgsConfig,
) -> Result<MinimizeResult> {
    let mut x = x0.clone();
    let (mut f, mut g) = obj.value_gradient(&x)?;
    let mut hist: VecDeque<(Point, Point, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let gn = g.norm();
        if gn < cfg.grad_tol {
            break;
        }
        iterations += 1;
        let mut d = two_loop(&g, &hist);
        if d.dot(&g) >= 0.0 {
            hist.clear();
            d = -&g;
        }
        // first iteration: unit-length probe
        let mut t = if hist.is_empty() { 1.0 / gn.max(1.0) } else { 1.0 };
        let slope = d.dot(&g);
        let mut next = None;
        for _ in 0..60 {
            let xn = &x + &d * t;
            if let Ok((fnew, gnew)) = obj.value_gradient(&xn) {
                if fnew.is_finite() && fnew <= f + 1e-4 * t * slope {
                    next = Some((xn, fnew, gnew));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew)) = next else {
            debug!("lbfgs line search failed at gradient norm {gn:e}");
            break;
        };
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gnew;
    }
    let grad_norm = g.norm();
    Ok(MinimizeResult {
        converged: grad_norm < cfg.grad_tol,
        x,
        value: f,
        grad_norm,
        iterations,
    })
}

fn two_loop(g: &Point, hist: &VecDeque<(Point, Point, f64)>) -> Point {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * s.dot(&q);
        q -= y * a;
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        q *= s.dot(y) / y.norm_squared();
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q += s * (a - b);
    }
    -q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{Counted, FnObjective};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn golden_quadratic_and_sine() {
        let t = golden_section_peak(|t| -(t - 0.5) * (t - 0.5), 0.0, 1.0, 1e-6);
        assert!((t - 0.5).abs() <= 1e-6);
        let t = golden_section_peak(|t| (std::f64::consts::PI * t).sin(), 0.0, 1.0, 1e-7);
        assert!((t - 0.5).abs() <= 1e-7);
    }

    #[test]
    fn golden_degenerate_bracket_returns_endpoint() {
        let mut calls = 0;
        let t = golden_section_peak(
            |t| {
                calls += 1;
                t
            },
            0.3,
            0.3,
            1e-6,
        );
        assert_eq!(t, 0.3);
        assert_eq!(calls, 0);
    }

    #[test]
    fn golden_result_stable_across_eps() {
        let f = |t: f64| -(t - 0.123).powi(2);
        for eps in [1e-3, 1e-5, 1e-8] {
            assert!((golden_section_peak(f, -1.0, 2.0, eps) - 0.123).abs() <= eps);
        }
    }

    fn quadratic() -> FnObjective {
        // f = (x-1)^2 + 3 (y+2)^2 - (x-1)(y+2)
        FnObjective::new(
            2,
            |p| {
                let (a, b) = (p[0] - 1.0, p[1] + 2.0);
                a * a + 3.0 * b * b - a * b
            },
            |p| {
                let (a, b) = (p[0] - 1.0, p[1] + 2.0);
                Point::from_vec(vec![2.0 * a - b, 6.0 * b - a])
            },
        )
        .with_hessian(|_| DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 6.0]))
    }

    #[test]
    fn newton_one_step_on_quadratic() {
        let f = Counted::new(quadratic());
        let x = newton_critical(&f, &Point::from_vec(vec![5.0, 5.0]), 1e-10, 1).unwrap();
        assert_relative_eq!(x, Point::from_vec(vec![1.0, -2.0]), epsilon = 1e-12);
    }

    #[test]
    fn newton_reports_last_iterate() {
        let f = FnObjective::new(1, |x| x[0].cos(), |x| Point::from_vec(vec![-x[0].sin()]));
        match newton_critical(&f, &Point::from_vec(vec![0.3]), 1e-300, 3) {
            Err(Error::NoConvergence { last, .. }) => assert!(last[0].abs() < 0.3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn newton_singular_hessian() {
        let f = FnObjective::new(1, |x| x[0], |_| Point::from_vec(vec![1.0]))
            .with_hessian(|_| DMatrix::zeros(1, 1));
        assert!(matches!(
            newton_critical(&f, &Point::zeros(1), 1e-8, 10),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn lm_linear_least_squares() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.9, 5.2, 6.8]);
        let (xr, yr) = (x.clone(), y.clone());
        let res = levenberg_marquardt(
            move |w| Ok(&xr * w - &yr),
            move |_| Ok(x.clone()),
            &DVector::zeros(2),
            &LmConfig {
                mu0: 1e-12,
                ..LmConfig::default()
            },
        )
        .unwrap();
        let xt = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let exact = (xt.transpose() * &xt).lu().solve(&(xt.transpose() * &y)).unwrap();
        assert_relative_eq!(res.w, exact, epsilon = 1e-9);
        assert!(res.accepted_costs.len() <= 3);
    }

    #[test]
    fn lm_rosenbrock() {
        let res = levenberg_marquardt(
            |w| Ok(DVector::from_vec(vec![1.0 - w[0], 10.0 * (w[1] - w[0] * w[0])])),
            |w| Ok(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -20.0 * w[0], 10.0])),
            &DVector::from_vec(vec![-1.2, 1.0]),
            &LmConfig::default(),
        )
        .unwrap();
        assert!((res.w[0] - 1.0).abs() < 1e-6 && (res.w[1] - 1.0).abs() < 1e-6);
        assert!(res.converged());
    }

    #[test]
    fn lm_accepted_costs_monotone_on_random_problems() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a2 = a.clone();
            let res = levenberg_marquardt(
                move |w| {
                    Ok(DVector::from_fn(6, |i, _| {
                        (a[i] * w[0]).sin() + w[1] * a[i] * a[i] - t[i]
                    }))
                },
                move |w| {
                    Ok(DMatrix::from_fn(6, 2, |i, c| {
                        if c == 0 {
                            a2[i] * (a2[i] * w[0]).cos()
                        } else {
                            a2[i] * a2[i]
                        }
                    }))
                },
                &DVector::from_vec(vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]),
                &LmConfig::default(),
            )
            .unwrap();
            assert!(res.accepted_costs.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn lbfgs_minimizes_quadratic() {
        let res = minimize_lbfgs(&quadratic(), &Point::from_vec(vec![4.0, 4.0]), &LbfgsConfig::default())
            .unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.x, Point::from_vec(vec![1.0, -2.0]), epsilon = 1e-7);
    }
}
