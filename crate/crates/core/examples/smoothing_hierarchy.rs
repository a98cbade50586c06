//! Coarse-to-fine smoothing hierarchy with an additive kernel, compared
//! with the same number of plain EM runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trusttech::experiments::DEFAULT_DATA_SEED;
use trusttech::gmm::{em_fit, gen_synthetic, random_start, CovKind, EmConfig, SyntheticId};
use trusttech::smoothing::{smooth_em_hierarchy, Hierarchy, KernelMode};

fn main() -> trusttech::Result<()> {
    let syn = gen_synthetic(SyntheticId::Elliptical3, None, DEFAULT_DATA_SEED);
    let em = EmConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let starts = (0..10)
        .map(|_| random_start(&syn.data, 3, CovKind::Diagonal, &mut rng))
        .collect::<trusttech::Result<Vec<_>>>()?;

    let h = Hierarchy {
        nl: 3,
        sfac: 0.6,
        ns: 3,
        // a multiplicative kernel only rescales covariances and leaves every level's maximum unchanged
        mode: KernelMode::Additive,
    };
    let res = smooth_em_hierarchy(&syn.data, &h, &em, &starts)?;
    for (i, t) in res.traces.iter().enumerate() {
        let levels: Vec<String> = t.level_log_likelihoods.iter().map(|l| format!("{l:.1}")).collect();
        println!("trace {i}: {} -> {:.2}", levels.join(" "), t.log_likelihood);
    }
    let plain = starts
        .iter()
        .map(|p| em_fit(p, &syn.data, &em).map(|f| f.log_likelihood()))
        .collect::<trusttech::Result<Vec<_>>>()?;
    let best_plain = plain.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst_plain = plain.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "hierarchy best {:.2}; multistart EM best {best_plain:.2}, worst {worst_plain:.2}",
        res.best().log_likelihood
    );
    Ok(())
}
