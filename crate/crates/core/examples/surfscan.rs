//! Multi-start Newton on the Muller-Brown surface, keeping each distinct
//! critical point with its classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trusttech::dynsys::{classify_critical, Objective, Point};
use trusttech::solvers::newton_critical;
use trusttech::surfaces::MullerBrown;

fn main() -> trusttech::Result<()> {
    let mb = MullerBrown::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut found: Vec<Point> = Vec::new();
    for _ in 0..400 {
        let x0 = Point::from_vec(vec![rng.gen_range(-1.5..1.2), rng.gen_range(-0.5..2.0)]);
        let Ok(p) = newton_critical(&mb, &x0, 1e-10, 100) else { continue };
        if found.iter().all(|q| (q - &p).norm() > 1e-6) {
            found.push(p);
        }
    }
    found.sort_by(|a, b| mb.value(a).unwrap().total_cmp(&mb.value(b).unwrap()));
    for p in &found {
        let kind = classify_critical(&mb, p, 1e-8).map(|c| format!("{:?}", c.kind));
        println!(
            "({:+.4}, {:+.4})  E = {:>9.3}  {}",
            p[0],
            p[1],
            mb.value(p)?,
            kind.unwrap_or_else(|e| e.to_string())
        );
    }
    Ok(())
}
