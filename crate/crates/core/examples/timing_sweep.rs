//! Seconds per sweep across topic counts on a KOS-sized synthetic corpus.
//! Usage: timing_sweep [replicates]

use blocklda::bench::{format_bench_row, run_bench, BenchConfig, BENCH_HEADER};
use blocklda::prelude::*;

fn main() -> Result<()> {
    let replicates = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let (corpus, _, _) = generate_synthetic(&SynthConfig::symmetric(3430, 6906, 50, 136, 0.1, 0.005, 2024))?;
    eprintln!("{} tokens, singleton fraction {:.3}", corpus.total_tokens(), singleton_fraction(&corpus)?);
    let cfg = BenchConfig::new(
        vec![8, 32, 128, 512, 1024],
        vec![SamplerKind::SingleSite, SamplerKind::BlockedBackward, SamplerKind::BlockedNested],
        replicates,
        1,
    );
    println!("{}", BENCH_HEADER);
    run_bench(&corpus, &cfg, |row| println!("{}", format_bench_row(row)))?;
    Ok(())
}
