//! Objectives and their negative-gradient dynamical system.
//!
//! Every objective `f` induces the flow `dx/dt = -grad f(x)`. Local minima of
//! `f` are stable equilibria of the flow, saddles are type-1 equilibria, and
//! `f` itself is a Lyapunov function. This module provides the [`Objective`]
//! trait, explicit Euler integration, finite-difference oracles and
//! Hessian-based classification of critical points.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// A state vector.
pub type Point = DVector<f64>;

/// Serde adapter writing a [`Point`] as a plain number array.
pub mod point_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Point;

    pub fn serialize<S: Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(p.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point, D::Error> {
        Ok(Point::from_vec(Vec::<f64>::deserialize(d)?))
    }

    /// The same for `Option<Point>`.
    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        use super::Point;

        pub fn serialize<S: Serializer>(p: &Option<Point>, s: S) -> Result<S::Ok, S::Error> {
            match p {
                Some(p) => s.collect_seq(p.iter()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Point>, D::Error> {
            Ok(Option::<Vec<f64>>::deserialize(d)?.map(Point::from_vec))
        }
    }
}

/// Relative degeneracy floor for Hessian eigenvalues.
pub const DEGENERACY_FLOOR: f64 = 1e-8;

/// Relative step used by the finite-difference Hessian fallback.
pub const FD_HESSIAN_REL_STEP: f64 = 1e-5;

/// A twice-differentiable scalar function of a real vector.
pub trait Objective: Send + Sync {
    /// Number of variables.
    fn dim(&self) -> usize;

    /// Objective value at `x`.
    fn value(&self, x: &Point) -> Result<f64>;

    /// Analytic gradient at `x`.
    fn gradient(&self, x: &Point) -> Result<Point>;

    /// Value and gradient together; override when they share work.
    fn value_gradient(&self, x: &Point) -> Result<(f64, Point)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }

    /// Analytic Hessian, if the objective provides one.
    fn hessian(&self, _x: &Point) -> Option<Result<DMatrix<f64>>> {
        None
    }

    /// Distance used to decide whether two optima coincide.
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        (a - b).norm()
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &Point) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point> {
        (**self).gradient(x)
    }
    fn value_gradient(&self, x: &Point) -> Result<(f64, Point)> {
        (**self).value_gradient(x)
    }
    fn hessian(&self, x: &Point) -> Option<Result<DMatrix<f64>>> {
        (**self).hessian(x)
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        (**self).distance(a, b)
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &Point) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point> {
        (**self).gradient(x)
    }
    fn value_gradient(&self, x: &Point) -> Result<(f64, Point)> {
        (**self).value_gradient(x)
    }
    fn hessian(&self, x: &Point) -> Option<Result<DMatrix<f64>>> {
        (**self).hessian(x)
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        (**self).distance(a, b)
    }
}

type ValueFn = dyn Fn(&Point) -> f64 + Send + Sync;
type GradFn = dyn Fn(&Point) -> Point + Send + Sync;
type HessFn = dyn Fn(&Point) -> DMatrix<f64> + Send + Sync;

/// Objective assembled from closures.
pub struct FnObjective {
    dim: usize,
    value: Box<ValueFn>,
    gradient: Box<GradFn>,
    hessian: Option<Box<HessFn>>,
}

impl FnObjective {
    pub fn new(
        dim: usize,
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok((self.value)(x))
    }
    fn gradient(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x)?;
        Ok((self.gradient)(x))
    }
    fn hessian(&self, x: &Point) -> Option<Result<DMatrix<f64>>> {
        self.hessian.as_ref().map(|h| {
            check_dim(self.dim, x)?;
            Ok(h(x))
        })
    }
}

/// Wrapper counting value and gradient evaluations.
pub struct Counted<O> {
    inner: O,
    values: AtomicUsize,
    gradients: AtomicUsize,
}

impl<O: Objective> Counted<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            values: AtomicUsize::new(0),
            gradients: AtomicUsize::new(0),
        }
    }

    pub fn value_evals(&self) -> usize {
        self.values.load(Ordering::Relaxed)
    }

    pub fn gradient_evals(&self) -> usize {
        self.gradients.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Objective> Objective for Counted<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &Point) -> Result<f64> {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point> {
        self.gradients.fetch_add(1, Ordering::Relaxed);
        self.inner.gradient(x)
    }
    fn value_gradient(&self, x: &Point) -> Result<(f64, Point)> {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.gradients.fetch_add(1, Ordering::Relaxed);
        self.inner.value_gradient(x)
    }
    fn hessian(&self, x: &Point) -> Option<Result<DMatrix<f64>>> {
        self.inner.hessian(x)
    }
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.inner.distance(a, b)
    }
}

pub(crate) fn check_dim(expected: usize, x: &Point) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Dimension {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

fn finite_gradient<O: Objective + ?Sized>(obj: &O, x: &Point) -> Result<Point> {
    check_dim(obj.dim(), x)?;
    let g = obj.gradient(x)?;
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!(
            "non-finite gradient component {i}"
        )));
    }
    Ok(g)
}

/// The vector field `-grad f(x)`.
pub fn vector_field<O: Objective + ?Sized>(obj: &O, x: &Point) -> Result<Point> {
    Ok(-finite_gradient(obj, x)?)
}

/// One explicit Euler step `x - grad f(x) * dt`.
pub fn euler_step<O: Objective + ?Sized>(obj: &O, x: &Point, dt: f64) -> Result<Point> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let g = finite_gradient(obj, x)?;
    let next = x - g * dt;
    if let Some(coord) = next.iter().position(|v| !v.is_finite()) {
        return Err(Error::Step { coord });
    }
    Ok(next)
}

/// `n` composed Euler steps.
pub fn integrate<O: Objective + ?Sized>(obj: &O, x: &Point, dt: f64, n: usize) -> Result<Point> {
    let mut cur = x.clone();
    for _ in 0..n {
        cur = euler_step(obj, &cur, dt)?;
    }
    Ok(cur)
}

/// Euclidean norm of the gradient.
pub fn grad_norm<O: Objective + ?Sized>(obj: &O, x: &Point) -> Result<f64> {
    Ok(finite_gradient(obj, x)?.norm())
}

/// Central-difference gradient of `obj.value` with uniform step `h`.
pub fn fd_gradient<O: Objective + ?Sized>(obj: &O, x: &Point, h: f64) -> Result<Point> {
    check_dim(obj.dim(), x)?;
    let mut g = Point::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = obj.value(&probe)?;
        probe[i] = x[i] - h;
        let fm = obj.value(&probe)?;
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Central differences of the analytic gradient with uniform step `h`.
///
/// Column `j` holds `(g(x + h e_j) - g(x - h e_j)) / 2h`; the result is not
/// symmetrized, so its asymmetry measures gradient consistency.
pub fn fd_hessian<O: Objective + ?Sized>(obj: &O, x: &Point, h: f64) -> Result<DMatrix<f64>> {
    let steps = vec![h; x.len()];
    fd_hessian_steps(obj, x, &steps)
}

fn fd_hessian_steps<O: Objective + ?Sized>(
    obj: &O,
    x: &Point,
    steps: &[f64],
) -> Result<DMatrix<f64>> {
    check_dim(obj.dim(), x)?;
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        let h = steps[j];
        probe[j] = x[j] + h;
        let gp = finite_gradient(obj, &probe)?;
        probe[j] = x[j] - h;
        let gm = finite_gradient(obj, &probe)?;
        probe[j] = x[j];
        hess.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    Ok(hess)
}

/// Analytic Hessian when available, otherwise a symmetrized finite-difference
/// Hessian with per-coordinate step `1e-5 * max(1, |x_i|)`.
pub fn hessian_or_fd<O: Objective + ?Sized>(obj: &O, x: &Point) -> Result<DMatrix<f64>> {
    if let Some(h) = obj.hessian(x) {
        return h;
    }
    let steps: Vec<f64> = x
        .iter()
        .map(|v| FD_HESSIAN_REL_STEP * v.abs().max(1.0))
        .collect();
    let h = fd_hessian_steps(obj, x, &steps)?;
    Ok((&h + h.transpose()) * 0.5)
}

/// Equilibrium type of a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    /// Local minimum (type-0).
    Stable,
    /// Type-1 saddle.
    Saddle,
    /// Type-k with `2 <= k < d`.
    TypeK(usize),
    /// All eigenvalues negative (local maximum).
    Source,
}

/// Classification of a critical point from its Hessian spectrum.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CriticalClass {
    pub kind: CriticalKind,
    pub negative_eigenvalues: usize,
    /// Hessian eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
}

impl CriticalClass {
    /// Maps a negative-eigenvalue count in dimension `dim` to a kind.
    pub fn kind_for(negative: usize, dim: usize) -> CriticalKind {
        match negative {
            0 => CriticalKind::Stable,
            k if k == dim => CriticalKind::Source,
            1 => CriticalKind::Saddle,
            k => CriticalKind::TypeK(k),
        }
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Classifies the critical point `x`, using the default degeneracy floor.
pub fn classify_critical<O: Objective + ?Sized>(
    obj: &O,
    x: &Point,
    tol: f64,
) -> Result<CriticalClass> {
    classify_critical_with(obj, x, tol, DEGENERACY_FLOOR)
}

/// Classifies the critical point `x`; eigenvalues with
/// `|lambda| < floor * max|lambda|` are rejected as degenerate.
pub fn classify_critical_with<O: Objective + ?Sized>(
    obj: &O,
    x: &Point,
    tol: f64,
    floor: f64,
) -> Result<CriticalClass> {
    let gn = grad_norm(obj, x)?;
    if !(gn < tol) {
        return Err(Error::NotCritical { grad_norm: gn, tol });
    }
    let eigenvalues = sorted_eigenvalues(&hessian_or_fd(obj, x)?);
    let scale = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = floor * scale;
    if let Some(&ev) = eigenvalues.iter().find(|v| v.abs() < cutoff || scale == 0.0) {
        return Err(Error::DegenerateCritical {
            eigenvalue: ev,
            floor: cutoff,
        });
    }
    let negative = eigenvalues.iter().filter(|v| **v < 0.0).count();
    Ok(CriticalClass {
        kind: CriticalClass::kind_for(negative, x.len()),
        negative_eigenvalues: negative,
        eigenvalues,
    })
}
