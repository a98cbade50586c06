//! On the Eckhardt surface the straight-line exit point between the two end
//! states is a source. Perturbing it to either side recovers one saddle per
//! side.

use trusttech::dynsys::{classify_critical, Point};
use trusttech::experiments::SaddlePreset;
use trusttech::saddle::locate_ddp_perturbed;
use trusttech::solvers::newton_critical;
use trusttech::surfaces::{reference as r, Eckhardt};

fn main() -> trusttech::Result<()> {
    let eck = Eckhardt::new();
    let cfg = SaddlePreset::EckhardtAB.default_config();
    let (a, b) = (Point::from_column_slice(&r::ECK_SEP_A), Point::from_column_slice(&r::ECK_SEP_B));
    let found = locate_ddp_perturbed(&eck, &a, &b, 1e-2, &cfg)?;

    let exit = newton_critical(&eck, &found[0].exit_point, 1e-10, 50)?;
    let kind = classify_critical(&eck, &exit, 1e-8)?.kind;
    println!("exit point ({:.4}, {:.4}) is a {kind:?}", exit[0], exit[1]);
    for s in &found {
        println!(
            "saddle ({:+.4}, {:+.4})  E = {:.4}  MGP |grad| {:.3}",
            s.ddp[0], s.ddp[1], s.ddp_energy, s.mgp_grad_norm
        );
    }
    Ok(())
}
