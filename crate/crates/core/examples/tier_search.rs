//! Enumerates minima of a rugged 2-D function tier by tier from one start
//! and lists the best of them with their tier and parent.

use trusttech::dynsys::Point;
use trusttech::evo::MultiWell;
use trusttech::tiersearch::{tier_search, DirectionStrategy, LbfgsSolver, TierConfig};

fn main() -> trusttech::Result<()> {
    let obj = MultiWell;
    let solver = LbfgsSolver::new(&obj);
    let cfg = TierConfig {
        step: 0.05,
        max_tiers: 3,
        prune_factor: 3.0,
        scale_steps: false,
        strategy: DirectionStrategy::Random { n: Some(6) },
        seed: 7,
        ..TierConfig::default()
    };
    let set = tier_search(&obj, &Point::from_vec(vec![3.2, -2.1]), &solver, &cfg)?;
    println!("{} distinct minima, best ten:", set.len());
    for (i, s) in set.solutions.iter().enumerate().take(10) {
        println!(
            "{i:>3}  tier {}  f = {:>8.4}  at ({:+.3}, {:+.3})  parent {:?}",
            s.tier, s.value, s.point[0], s.point[1], s.parent
        );
    }
    Ok(())
}
