//! Heptamer island on a Morse slab (525 free coordinates). The second
//! minimum translates the whole island into the neighbouring hollow sites.
//!
//! Pass `--small` for the reduced slab.

use trusttech::dynsys::Objective;
use trusttech::experiments::{heptamer_minima, SaddlePreset};
use trusttech::saddle::locate_ddp;
use trusttech::surfaces::{MorseSlab, SlabConfig};

fn main() -> trusttech::Result<()> {
    let cfg = if std::env::args().any(|a| a == "--small") {
        SlabConfig::desk_scale()
    } else {
        SlabConfig::default()
    };
    let slab = MorseSlab::new(cfg)?;
    println!("{} free coordinates", slab.dim());
    let (a, b) = heptamer_minima(&slab)?;
    println!("minima E = {:.4}, {:.4}", slab.value(&a)?, slab.value(&b)?);

    let s = locate_ddp(&slab, &a, &b, &SaddlePreset::Heptamer.default_config())?;
    println!(
        "MGP |grad| {:.4} after {} gradient evaluations",
        s.mgp_grad_norm, s.force_evals
    );
    println!(
        "saddle E = {:.4}, barrier {:.4}, {} negative eigenvalue(s)",
        s.ddp_energy,
        s.ddp_energy - slab.value(&a)?,
        s.ddp_class.negative_eigenvalues
    );
    Ok(())
}
