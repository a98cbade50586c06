//! Collinear H + H2 exchange on the LEPS surface. Both reactant channels
//! descend towards dissociation, so the end points are taken deep in each
//! channel rather than at minima.

use trusttech::dynsys::Point;
use trusttech::experiments::SaddlePreset;
use trusttech::saddle::locate_ddp;
use trusttech::surfaces::Leps;

fn main() -> trusttech::Result<()> {
    let leps = Leps::new();
    let a = Point::from_vec(vec![0.742, 3.0]);
    let b = Point::from_vec(vec![3.0, 0.742]);
    let s = locate_ddp(&leps, &a, &b, &SaddlePreset::Leps.default_config())?;
    println!("exit point  r_AB = {:.4}  r_BC = {:.4}", s.exit_point[0], s.exit_point[1]);
    println!(
        "saddle      r_AB = {:.4}  r_BC = {:.4}  E = {:.4}  {:?}",
        s.ddp[0], s.ddp[1], s.ddp_energy, s.ddp_class.kind
    );
    Ok(())
}
