//! Fit a synthetic corpus with each sampler and print the log posterior
//! and held-out perplexity as the chains run.

use blocklda::prelude::*;

fn main() -> Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let (corpus, _, _) = generate_synthetic(&SynthConfig::symmetric(200, 25, 10, 100, 0.1, 0.01, seed))?;
    let (train, test) = document_completion_split(&corpus, &SplitSpec::new(25, 0.5, seed))?;
    let hp = Hyperparams::symmetric(10, 25, 0.1, 0.01)?;
    println!("iteration  {:>14} {:>14} {:>14}", "single", "nested", "augmented");
    let kinds = [SamplerKind::SingleSite, SamplerKind::BlockedNested, SamplerKind::Augmented];
    let mut traces = Vec::new();
    for kind in kinds {
        traces.push(run_chain(&train, Some(&test), &hp, &ChainConfig::new(kind, 300, seed), &mut NoopObserver)?.trace);
    }
    for t in (0..=300).step_by(20) {
        print!("{:>9}", t);
        for trace in &traces {
            print!("  {:>13.2}", trace[t].log_posterior);
        }
        println!();
    }
    for (kind, trace) in kinds.iter().zip(&traces) {
        println!("{:<10} final perplexity {:.4}", kind.name(), trace.last().unwrap().perplexity.unwrap());
    }
    Ok(())
}
