//! Three-atom Lennard-Jones cluster in reduced coordinates. The two
//! triangles are mirror images, so the midpoint between them lies exactly on
//! the basin boundary and plain gradient-flow integration from it ends on
//! the collinear saddle.

use trusttech::dynsys::{classify_critical, Objective, Point};
use trusttech::experiments::SaddlePreset;
use trusttech::saddle::symmetric_ddp;
use trusttech::surfaces::{reference as r, Lj3Reduced};

fn main() -> trusttech::Result<()> {
    let lj3 = Lj3Reduced::new();
    let cfg = SaddlePreset::Lj3.default_config();
    let a = Point::from_column_slice(&r::LJ3_SEP_A);
    let b = Point::from_column_slice(&r::LJ3_SEP_B);
    println!("minima energies {:.4} {:.4}", lj3.value(&a)?, lj3.value(&b)?);

    let exit = (&a + &b) * 0.5;
    let ddp = symmetric_ddp(&lj3, &exit, cfg.dt, 2_000_000, cfg.critical_tol)?;
    let class = classify_critical(&lj3, &ddp, cfg.critical_tol)?;
    println!(
        "saddle {:?}  E = {:.4}  negative eigenvalues {}",
        ddp.as_slice(),
        lj3.value(&ddp)?,
        class.negative_eigenvalues
    );
    println!("atom positions {:?}", Lj3Reduced::embed(&ddp).as_slice());
    Ok(())
}
