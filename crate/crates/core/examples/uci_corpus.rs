//! Load a UCI bag-of-words corpus (or write a small one first), summarize it
//! and run a short nested chain. Usage: uci_corpus [docword.txt [vocab.txt]]

use std::fs::File;
use std::io::BufReader;

use blocklda::prelude::*;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let corpus = match args.first() {
        Some(path) => {
            let docs = BufReader::new(File::open(path)?);
            let vocab = args.get(1).map(File::open).transpose()?.map(BufReader::new);
            parse_uci_bow(docs, vocab)?
        }
        None => {
            let (c, _, _) = generate_synthetic(&SynthConfig::symmetric(100, 300, 8, 80, 0.1, 0.01, 4))?;
            let text = write_uci_bow(&c);
            println!("no file given; using a generated corpus:\n{}", text.lines().take(6).collect::<Vec<_>>().join("\n"));
            parse_uci_bow(text.as_bytes(), None::<&[u8]>)?
        }
    };
    println!(
        "{} documents, {} words, {} tokens, {} nonzero cells, singleton fraction {:.3}",
        corpus.num_docs(),
        corpus.vocab_size(),
        corpus.total_tokens(),
        corpus.num_entries(),
        singleton_fraction(&corpus)?
    );
    let hp = Hyperparams::symmetric(20, corpus.vocab_size(), 0.1, 0.01)?;
    let out = run_chain(&corpus, None, &hp, &ChainConfig::new(SamplerKind::BlockedNested, 50, 9), &mut |r: &TraceRecord| {
        if r.iteration % 10 == 0 {
            println!("iteration {:>3}  log posterior {:.2}", r.iteration, r.log_posterior);
        }
    })?;
    let est = estimate_params(&out.state, &hp);
    let mut top: Vec<usize> = (0..corpus.vocab_size()).collect();
    top.sort_by(|&a, &b| est.phi_row(0)[b].total_cmp(&est.phi_row(0)[a]));
    let label = |v: usize| corpus.vocab().map_or_else(|| format!("w{}", v + 1), |l| l[v].clone());
    println!("topic 0: {}", top.iter().take(8).map(|&v| label(v)).collect::<Vec<_>>().join(" "));
    Ok(())
}
