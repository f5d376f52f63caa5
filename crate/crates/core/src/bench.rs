//! Per-iteration timing across topic counts and samplers.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::kernel::OpCounter;
use crate::model::{BlockState, Hyperparams};
use crate::samplers::{derive_chain_seed, SamplerKind, SweepOrder, Sweeper};

pub const DEFAULT_K_SWEEP: [usize; 8] = [8, 16, 32, 64, 128, 256, 512, 1024];
pub const BENCH_HEADER: &str = "K,sampler,mean_sec,sd_sec,density_ops,sampling_stages";

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub topic_counts: Vec<usize>,
    pub kinds: Vec<SamplerKind>,
    /// Timed sweeps per `(K, sampler)` cell.
    pub replicates: usize,
    /// Untimed sweeps before the first timed one.
    pub warmup: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub order: SweepOrder,
}

impl BenchConfig {
    pub fn new(topic_counts: Vec<usize>, kinds: Vec<SamplerKind>, replicates: usize, seed: u64) -> Self {
        BenchConfig {
            topic_counts,
            kinds,
            replicates,
            warmup: 1,
            alpha: 0.1,
            beta: 0.01,
            seed,
            order: SweepOrder::Fixed,
        }
    }
}

/// One `(K, sampler)` cell. Operation counts are per iteration, averaged over
/// the timed replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub num_topics: usize,
    pub kind: SamplerKind,
    pub mean_sec: f64,
    pub sd_sec: f64,
    pub density_ops: u64,
    pub sampling_stages: u64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn bench_cell(corpus: &Corpus, k: usize, kind: SamplerKind, cfg: &BenchConfig) -> Result<BenchRow> {
    if cfg.replicates == 0 {
        return Err(Error::config("at least one replicate is required"));
    }
    let hp = Hyperparams::symmetric(k, corpus.vocab_size(), cfg.alpha, cfg.beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_chain_seed(cfg.seed, k as u64));
    let state = BlockState::init_with_rng(corpus, &hp, &mut rng)?;
    let mut sweeper = Sweeper::new(kind, state)?;
    for _ in 0..cfg.warmup {
        sweeper.sweep(&hp, cfg.order, &mut rng, &mut OpCounter::default())?;
    }
    let mut times = Vec::with_capacity(cfg.replicates);
    let mut ops = OpCounter::default();
    for _ in 0..cfg.replicates {
        let started = Instant::now();
        sweeper.sweep(&hp, cfg.order, &mut rng, &mut ops)?;
        times.push(started.elapsed().as_secs_f64());
    }
    let (mean_sec, sd_sec) = mean_sd(&times);
    let r = cfg.replicates as u64;
    Ok(BenchRow {
        num_topics: k,
        kind,
        mean_sec,
        sd_sec,
        density_ops: ops.density_ops / r,
        sampling_stages: ops.sampling_stages / r,
    })
}

/// Cartesian product of topic counts and samplers, K-major.
pub fn run_bench(corpus: &Corpus, cfg: &BenchConfig, mut on_row: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(cfg.topic_counts.len() * cfg.kinds.len());
    for &k in &cfg.topic_counts {
        for &kind in &cfg.kinds {
            let row = bench_cell(corpus, k, kind, cfg)?;
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn format_bench_row(row: &BenchRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        row.num_topics, row.kind, row.mean_sec, row.sd_sec, row.density_ops, row.sampling_stages
    )
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut sink: W) -> Result<()> {
    writeln!(sink, "{}", BENCH_HEADER)?;
    for row in rows {
        writeln!(sink, "{}", format_bench_row(row))?;
    }
    sink.flush()?;
    Ok(())
}
