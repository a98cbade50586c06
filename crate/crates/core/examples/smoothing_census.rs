//! Counts distinct EM end points at several additive smoothing levels.
//! Moderate smoothing merges most spurious maxima; heavy smoothing splits
//! the surface again because the de-smoothed variances hit the floor.

use trusttech::experiments::DEFAULT_DATA_SEED;
use trusttech::gmm::{gen_synthetic, CovKind, EmConfig, SyntheticId};
use trusttech::smoothing::{count_local_maxima, KernelSpec, CENSUS_DEDUP_TOL};

fn main() -> trusttech::Result<()> {
    let starts = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let syn = gen_synthetic(SyntheticId::Elliptical3, None, DEFAULT_DATA_SEED);
    let sd = syn.data.variance_scale().sqrt();
    println!("{starts} starts; level in data standard deviations");
    for level in [0.0, 0.3, 0.6, 0.9, 1.8] {
        let kernel = KernelSpec::additive(level * sd);
        let n = count_local_maxima(
            &syn.data,
            3,
            CovKind::Diagonal,
            starts,
            &kernel,
            &EmConfig::default(),
            CENSUS_DEDUP_TOL,
            1,
        )?;
        println!("level {level:.1}: {n} distinct maxima");
    }
    Ok(())
}
