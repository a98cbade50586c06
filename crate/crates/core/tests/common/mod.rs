#![allow(dead_code)]

use rand::Rng;
use trusttech::dynsys::{Objective, Point};

/// Central differences with a per-coordinate step scaled to `|x_i|`.
pub fn central_diff(f: impl Fn(&Point) -> f64, x: &Point) -> Point {
    let mut g = Point::zeros(x.len());
    let mut p = x.clone();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        p[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// `||a - b|| / max(||b||, 1)`.
pub fn rel_err(a: &Point, b: &Point) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Worst relative gradient error of `obj` over `n` points from `sample`.
pub fn worst_gradient_error<O: Objective + ?Sized, R: Rng>(
    obj: &O,
    n: usize,
    rng: &mut R,
    mut sample: impl FnMut(&mut R) -> Point,
) -> f64 {
    (0..n)
        .map(|_| {
            let x = sample(rng);
            let g = obj.gradient(&x).expect("gradient");
            let fd = central_diff(|p| obj.value(p).expect("value"), &x);
            rel_err(&g, &fd)
        })
        .fold(0.0, f64::max)
}

pub fn box_point<R: Rng>(rng: &mut R, bounds: &[(f64, f64)]) -> Point {
    Point::from_iterator(bounds.len(), bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)))
}

pub fn pt(v: &[f64]) -> Point {
    Point::from_column_slice(v)
}
