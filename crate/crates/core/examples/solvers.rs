//! The local solvers on small problems: L-BFGS on the Rosenbrock valley and
//! Levenberg-Marquardt on an exponential fit.

use nalgebra::{DMatrix, DVector};
use trusttech::dynsys::{FnObjective, Point};
use trusttech::solvers::{levenberg_marquardt, minimize_lbfgs, LbfgsConfig, LmConfig};

fn main() -> trusttech::Result<()> {
    let rosen = FnObjective::new(
        2,
        |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
        |x| {
            Point::from_vec(vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ])
        },
    );
    let r = minimize_lbfgs(&rosen, &Point::from_vec(vec![-1.2, 1.0]), &LbfgsConfig::default())?;
    println!("L-BFGS: x = {:?} after {} iterations", r.x.as_slice(), r.iterations);

    // y = a exp(b t) sampled without noise at a = 2, b = -0.7
    let t: Vec<f64> = (0..12).map(|i| i as f64 * 0.25).collect();
    let y: Vec<f64> = t.iter().map(|t| 2.0 * (-0.7 * t).exp()).collect();
    let t2 = t.clone();
    let fit = levenberg_marquardt(
        move |w| Ok(DVector::from_fn(t.len(), |i, _| w[0] * (w[1] * t[i]).exp() - y[i])),
        move |w| {
            Ok(DMatrix::from_fn(t2.len(), 2, |i, c| {
                let e = (w[1] * t2[i]).exp();
                if c == 0 { e } else { w[0] * t2[i] * e }
            }))
        },
        &DVector::from_vec(vec![1.0, 0.0]),
        &LmConfig::default(),
    )?;
    println!("LM: a = {:.6}, b = {:.6}", fit.w[0], fit.w[1]);
    Ok(())
}
