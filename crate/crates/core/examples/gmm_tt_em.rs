//! Plain EM against tier-search EM on the three-component elliptical data.
//! Some random starts leave EM on a poor local maximum; one tier of exit
//! point escapes is enough to reach the good one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trusttech::experiments::DEFAULT_DATA_SEED;
use trusttech::gmm::{em_fit, gen_synthetic, random_start, EmConfig, SyntheticId};
use trusttech::tiersearch::TierConfig;

fn main() -> trusttech::Result<()> {
    let syn = gen_synthetic(SyntheticId::Elliptical3, None, DEFAULT_DATA_SEED);
    let em = EmConfig::default();
    let truth = em_fit(&syn.truth, &syn.data, &em)?.log_likelihood();
    println!("n = {}, EM from the generating mixture: {truth:.1}", syn.data.n());
    println!("start      EM   tt_em  tier-1 minima");
    for seed in 15..20 {
        let p0 = random_start(&syn.data, 3, syn.truth.kind(), &mut ChaCha8Rng::seed_from_u64(seed))?;
        let tier = TierConfig {
            step: 0.05,
            max_tiers: 1,
            seed,
            ..TierConfig::default()
        };
        let r = trusttech::gmm::tt_em(&p0, &syn.data, &em, &tier)?;
        println!(
            "{seed:>5} {:>7.1} {:>7.1} {:>6}",
            r.em_log_likelihood,
            r.log_likelihood,
            r.solutions.len() - 1
        );
    }
    Ok(())
}
