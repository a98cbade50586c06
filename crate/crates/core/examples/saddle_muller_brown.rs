//! Saddles between the three Muller-Brown minima, with the boundary trace
//! that leads from the exit point to the minimum gradient point.

use trusttech::dynsys::Point;
use trusttech::saddle::{locate_ddp, SaddleConfig};
use trusttech::surfaces::{reference as r, MullerBrown};

fn main() -> trusttech::Result<()> {
    let mb = MullerBrown::new();
    let cfg = SaddleConfig::default();
    let pairs = [("A", r::MB_SEP_A, "B", r::MB_SEP_B), ("B", r::MB_SEP_B, "C", r::MB_SEP_C)];
    for (na, a, nb, b) in pairs {
        let s = locate_ddp(&mb, &Point::from_column_slice(&a), &Point::from_column_slice(&b), &cfg)?;
        println!("{na} -> {nb}");
        println!("  exit point  ({:.4}, {:.4})", s.exit_point[0], s.exit_point[1]);
        println!(
            "  MGP         ({:.4}, {:.4})  |grad| {:.3} after {} hops",
            s.mgp[0],
            s.mgp[1],
            s.mgp_grad_norm,
            s.boundary_trace.points.len()
        );
        println!(
            "  saddle      ({:.4}, {:.4})  E = {:.3}  eigenvalues {:?}",
            s.ddp[0], s.ddp[1], s.ddp_energy, s.ddp_class.eigenvalues
        );
        println!("  {} gradient and {} energy evaluations", s.force_evals, s.energy_evals);
    }
    Ok(())
}
