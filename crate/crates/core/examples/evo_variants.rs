//! Gaussian mutation, local refinement and tier-1 search as the child
//! operator of the same evolutionary loop, on paired seeds.

use trusttech::evo::{ea_run, EvoConfig, EvoVariant, MultiWell};
use trusttech::tiersearch::{LbfgsSolver, LocalSolver};

fn main() -> trusttech::Result<()> {
    let obj = MultiWell;
    let solver = LbfgsSolver::new(&obj);
    let variants = [EvoVariant::Mutate, EvoVariant::LocalRefine, EvoVariant::TrustTech];
    println!("seed   mutate  local_refine  trust_tech");
    for seed in 0..8 {
        let mut row = Vec::new();
        for variant in variants {
            let cfg = EvoConfig {
                generations: 10,
                variant,
                seed,
                ..EvoConfig::default()
            };
            let s = (variant != EvoVariant::Mutate).then_some(&solver as &dyn LocalSolver);
            row.push(ea_run(&obj, &cfg, &MultiWell::BOUNDS, s)?.best.value);
        }
        println!("{seed:>4} {:>8.4} {:>13.4} {:>11.4}", row[0], row[1], row[2]);
    }
    Ok(())
}
