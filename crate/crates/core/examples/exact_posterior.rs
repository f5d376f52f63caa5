//! Enumerate the full posterior of a two-document corpus and check that a
//! long blocked chain visits configurations in proportion to it.

use std::collections::HashMap;

use blocklda::kernel::OpCounter;
use blocklda::oracle::{configuration_key, enumerate_full_posterior};
use blocklda::prelude::*;
use blocklda::samplers::Sweeper;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let corpus = Corpus::from_entries(2, 3, [(0, 0, 2), (0, 1, 1), (1, 1, 1), (1, 2, 2)])?;
    let hp = Hyperparams::symmetric(2, 3, 0.1, 0.01)?;
    let exact = enumerate_full_posterior(&corpus, &hp)?;
    println!("{} configurations, log normalizer {:.6}", exact.len(), exact.log_normalizer);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in SamplerKind::ALL {
        let state = BlockState::init_with_rng(&corpus, &hp, &mut rng)?;
        let mut sweeper = Sweeper::new(kind, state)?;
        let mut ops = OpCounter::default();
        let mut hist: HashMap<Vec<u32>, u64> = HashMap::new();
        for _ in 0..300_000 {
            sweeper.sweep(&hp, SweepOrder::Fixed, &mut rng, &mut ops)?;
            *hist.entry(configuration_key(sweeper.state())).or_default() += 1;
        }
        println!("{:<10} TV {:.4}", kind.name(), exact.tv_from_counts(&hist));
    }
    Ok(())
}
