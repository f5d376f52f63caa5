//! Draw one block's topic counts with both exact kernels and compare the
//! empirical frequencies with the enumerated conditional.

use std::collections::HashMap;

use blocklda::kernel::{BlockKernel, BlockSampler, OpCounter};
use blocklda::oracle::enumerate_block_pmf;
use blocklda::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let hp = Hyperparams::symmetric(4, 50, 0.1, 0.01)?;
    let ctx = BlockContext {
        residual_doc: vec![3, 0, 7, 1],
        residual_word: vec![2, 0, 5, 0],
        residual_total: vec![40, 12, 90, 25],
        block_size: 3,
    };
    let exact = enumerate_block_pmf(&ctx, &hp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for kernel in [BlockKernel::Backward, BlockKernel::Nested] {
        let mut sampler = BlockSampler::new(kernel, 4)?;
        let mut ops = OpCounter::default();
        let mut hist: HashMap<Vec<u32>, u64> = HashMap::new();
        let draws = 200_000;
        for _ in 0..draws {
            *hist.entry(sampler.sample(&ctx, &hp, &mut rng, &mut ops)?).or_default() += 1;
        }
        println!(
            "{:?}: TV to exact {:.4}, {} density ops and {} sampling stages per draw",
            kernel,
            exact.tv_from_counts(&hist),
            ops.density_ops / draws,
            ops.sampling_stages as f64 / draws as f64
        );
    }
    let mut top: Vec<_> = exact.support.iter().zip(&exact.probabilities).collect();
    top.sort_by(|a, b| b.1.total_cmp(a.1));
    for (n, p) in top.iter().take(5) {
        println!("  {:?}  {:.5}", n, p);
    }
    Ok(())
}
