//! Acceptance suite. Runs every criterion in sequence (timing checks must not
//! share the machine with other tests) and prints one PASS/FAIL line each.

use std::collections::HashMap;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use blocklda::bench::{run_bench, BenchConfig};
use blocklda::cli::{cmd_fit, RunConfig, AlphaSpec};
use blocklda::corpus::{document_completion_split, generate_synthetic, Corpus, SplitSpec, SynthConfig};
use blocklda::diagnostics::{estimate_params, MixtureAccumulator, ParamEstimate, TraceRecord};
use blocklda::kernel::{
    build_topic_tree, compute_weights, forward_constants, upward_constants, BlockKernel,
    BlockSampler, OpCounter,
};
use blocklda::model::{log_posterior_delta, BlockContext, BlockState, Hyperparams};
use blocklda::oracle::{configuration_key, enumerate_block_pmf, enumerate_full_posterior, ExactPmf};
use blocklda::samplers::{
    derive_chain_seed, run_chain, single_site_conditional, ChainConfig, NoopObserver, SamplerKind, SweepOrder,
    Sweeper,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
    /// Reported but not allowed to fail the run: the outcome depends on the
    /// machine and on the relative cost of arithmetic versus sampling steps.
    advisory: bool,
}

impl Outcome {
    fn gate(passed: bool, detail: String) -> Self {
        Outcome {
            passed,
            detail,
            advisory: false,
        }
    }
}

fn random_context(rng: &mut ChaCha8Rng) -> (BlockContext, Hyperparams) {
    let k = rng.random_range(2..=5usize);
    let c = rng.random_range(1..=4u32);
    let grid = [0.01, 0.1, 1.0];
    let alpha = grid[rng.random_range(0..3)];
    let beta = grid[rng.random_range(0..3)];
    let v = rng.random_range(10..=100usize);
    let residual_doc: Vec<u32> = (0..k).map(|_| rng.random_range(0..=20)).collect();
    let residual_word: Vec<u32> = (0..k).map(|_| rng.random_range(0..=20)).collect();
    let residual_total = residual_word.iter().map(|&w| w + rng.random_range(0..=100)).collect();
    let ctx = BlockContext {
        residual_doc,
        residual_word,
        residual_total,
        block_size: c,
    };
    (ctx, Hyperparams::symmetric(k, v, alpha, beta).unwrap())
}

fn kernel_exactness() -> Outcome {
    const CONTEXTS: usize = 50;
    const DRAWS: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xB10C);
    let mut worst_rel: f64 = 0.0;
    let mut worst_tv: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..CONTEXTS {
        let (ctx, hp) = random_context(&mut rng);
        let pmf = enumerate_block_pmf(&ctx, &hp).unwrap();
        let mut ops = OpCounter::default();
        let q = compute_weights(&ctx, &hp, &mut ops);
        let forward = forward_constants(&q, &mut ops).unwrap().log_normalizer();
        let tree = build_topic_tree(ctx.num_topics()).unwrap();
        let upward = upward_constants(&tree, &q, &mut ops).unwrap().log_normalizer();
        for log_h in [forward, upward] {
            let rel = (log_h - pmf.log_normalizer).exp_m1().abs();
            worst_rel = worst_rel.max(rel);
            if rel >= 1e-10 {
                failures.push(format!("context {} normalizer rel err {:e}", i, rel));
            }
        }
        for kernel in [BlockKernel::Backward, BlockKernel::Nested] {
            let mut sampler = BlockSampler::new(kernel, ctx.num_topics()).unwrap();
            let mut hist: HashMap<Vec<u32>, u64> = HashMap::new();
            for _ in 0..DRAWS {
                let n = sampler.sample(&ctx, &hp, &mut rng, &mut ops).unwrap();
                *hist.entry(n).or_default() += 1;
            }
            let tv = pmf.tv_from_counts(&hist);
            worst_tv = worst_tv.max(tv);
            if tv >= 0.01 {
                failures.push(format!(
                    "context {} {:?} K={} C={} TV {:.4} over {} compositions",
                    i,
                    kernel,
                    ctx.num_topics(),
                    ctx.block_size,
                    tv,
                    pmf.len()
                ));
            }
        }
    }
    Outcome::gate(
        failures.is_empty(),
        format!(
            "{} contexts, max normalizer rel err {:.1e}, max TV {:.4} at {} draws{}",
            CONTEXTS,
            worst_rel,
            worst_tv,
            DRAWS,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

/// D=2, V=3, three tokens per document, with repeated words so blocks of
/// size two occur.
fn tiny_corpus() -> Corpus {
    Corpus::from_entries(2, 3, [(0, 0, 2), (0, 1, 1), (1, 1, 1), (1, 2, 2)]).unwrap()
}

fn stationary_tv(kind: SamplerKind, exact: &ExactPmf, sweeps: usize, seed: u64) -> f64 {
    let corpus = tiny_corpus();
    let hp = Hyperparams::symmetric(2, 3, 0.1, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = BlockState::init_with_rng(&corpus, &hp, &mut rng).unwrap();
    let mut sweeper = Sweeper::new(kind, state).unwrap();
    let mut ops = OpCounter::default();
    for _ in 0..1_000 {
        sweeper.sweep(&hp, SweepOrder::Fixed, &mut rng, &mut ops).unwrap();
    }
    let mut hist: HashMap<Vec<u32>, u64> = HashMap::new();
    for _ in 0..sweeps {
        sweeper.sweep(&hp, SweepOrder::Fixed, &mut rng, &mut ops).unwrap();
        *hist.entry(configuration_key(sweeper.state())).or_default() += 1;
    }
    exact.tv_from_counts(&hist)
}

fn stationarity() -> Outcome {
    const SWEEPS: usize = 1_000_000;
    let hp = Hyperparams::symmetric(2, 3, 0.1, 0.01).unwrap();
    let exact = enumerate_full_posterior(&tiny_corpus(), &hp).unwrap();
    let cases = [
        (SamplerKind::SingleSite, 0.02),
        (SamplerKind::BlockedBackward, 0.02),
        (SamplerKind::BlockedNested, 0.02),
        (SamplerKind::Augmented, 0.03),
    ];
    let tvs: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .iter()
            .enumerate()
            .map(|(i, &(kind, _))| {
                let exact = &exact;
                s.spawn(move || stationary_tv(kind, exact, SWEEPS, 100 + i as u64))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let passed = cases.iter().zip(&tvs).all(|(&(_, limit), &tv)| tv < limit);
    let detail = cases
        .iter()
        .zip(&tvs)
        .map(|(&(kind, limit), tv)| format!("{} TV {:.4} (< {})", kind, tv, limit))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::gate(passed, format!("{} states, {} sweeps: {}", exact.len(), SWEEPS, detail))
}

fn singleton_reduction() -> Outcome {
    // Every block holds one token.
    let (base, _, _) = generate_synthetic(&SynthConfig::symmetric(30, 40, 4, 25, 0.5, 0.1, 17)).unwrap();
    let cells: Vec<(usize, usize, u32)> = base.entries().iter().map(|e| (e.doc as usize, e.word as usize, 1)).collect();
    let corpus = Corpus::from_entries(30, 40, cells).unwrap();
    let mut max_diff: f64 = 0.0;
    let mut blocks = 0;
    for (k, alpha, beta) in [(2, 0.1, 0.01), (7, 0.5, 0.1), (16, 1.0, 1.0)] {
        let hp = Hyperparams::symmetric(k, 40, alpha, beta).unwrap();
        let state = BlockState::init(&corpus, &hp, k as u64).unwrap();
        let mut backward = BlockSampler::new(BlockKernel::Backward, k).unwrap();
        let mut nested = BlockSampler::new(BlockKernel::Nested, k).unwrap();
        for b in 0..state.num_blocks() {
            let ctx = state.context_at(b);
            // Single-token conditional written out term by term.
            let w: Vec<f64> = (0..k)
                .map(|t| {
                    (f64::from(ctx.residual_doc[t]) + alpha) * (f64::from(ctx.residual_word[t]) + beta)
                        / (f64::from(ctx.residual_total[t]) + 40.0 * beta)
                })
                .collect();
            let z: f64 = w.iter().sum();
            let single = single_site_conditional(&ctx.residual_doc, &ctx.residual_word, &ctx.residual_total, &hp);
            for t in 0..k {
                let mut unit = vec![0u32; k];
                unit[t] = 1;
                let expected = w[t] / z;
                for p in [
                    single[t],
                    backward.transition_prob(&ctx, &hp, &unit).unwrap(),
                    nested.transition_prob(&ctx, &hp, &unit).unwrap(),
                ] {
                    max_diff = max_diff.max((p - expected).abs());
                }
            }
            blocks += 1;
        }
    }
    Outcome::gate(
        max_diff < 1e-12,
        format!("{} singleton blocks, max |p - p_single| = {:.2e}", blocks, max_diff),
    )
}

fn stage_bound(k: usize, c: u32) -> u64 {
    let log2 = (k as f64).log2().ceil() as u64;
    (2 * k as u64 - 1).min(u64::from(c) * (log2 + 1))
}

fn complexity_accounting() -> Outcome {
    let (corpus, _, _) = generate_synthetic(&SynthConfig::symmetric(60, 80, 5, 120, 0.1, 0.005, 23)).unwrap();
    let mut worst_ratio: f64 = 1.0;
    let mut leading_ratio_range = (f64::INFINITY, 0.0f64);
    let mut bound_violations = 0;
    let mut blocks_checked = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in [1usize, 2, 3, 7, 16, 33, 64, 100] {
        let hp = Hyperparams::symmetric(k, corpus.vocab_size(), 0.1, 0.01).unwrap();
        let expected: u64 = corpus.entries().iter().map(|e| {
            let (c, kk) = (u64::from(e.count), k as u64);
            // Weight table plus K - 1 convolutions of length C + 1.
            kk * c + (kk - 1) * (c + 1) * (c + 2) / 2
        }).sum();
        let leading: f64 = corpus.entries().iter().map(|e| (f64::from(e.count) + 1.0).powi(2) * k as f64 / 2.0).sum();
        for kind in [SamplerKind::BlockedBackward, SamplerKind::BlockedNested] {
            let state = BlockState::init_with_rng(&corpus, &hp, &mut rng).unwrap();
            let mut sweeper = Sweeper::new(kind, state).unwrap();
            let mut ops = OpCounter::default();
            sweeper.sweep(&hp, SweepOrder::Fixed, &mut rng, &mut ops).unwrap();
            let ratio = ops.density_ops as f64 / expected as f64;
            if (ratio - 1.0).abs() > (worst_ratio - 1.0).abs() {
                worst_ratio = ratio;
            }
            if k > 1 {
                let lr = ops.density_ops as f64 / leading;
                leading_ratio_range = (leading_ratio_range.0.min(lr), leading_ratio_range.1.max(lr));
            }
        }
        let state = BlockState::init_with_rng(&corpus, &hp, &mut rng).unwrap();
        let mut nested = BlockSampler::new(BlockKernel::Nested, k).unwrap();
        for b in 0..state.num_blocks() {
            let ctx = state.context_at(b);
            for _ in 0..5 {
                let mut ops = OpCounter::default();
                nested.sample(&ctx, &hp, &mut rng, &mut ops).unwrap();
                if ops.sampling_stages > stage_bound(k, ctx.block_size) {
                    bound_violations += 1;
                }
                blocks_checked += 1;
            }
        }
    }
    // Large blocks against wide trees.
    for (k, c) in [(1024usize, 1u32), (1024, 7), (1000, 40), (5, 60), (129, 300)] {
        let hp = Hyperparams::symmetric(k, 50, 0.1, 0.01).unwrap();
        let ctx = BlockContext {
            residual_doc: (0..k).map(|_| rng.random_range(0..5)).collect(),
            residual_word: (0..k).map(|_| rng.random_range(0..5)).collect(),
            residual_total: (0..k).map(|_| rng.random_range(5..500)).collect(),
            block_size: c,
        };
        let mut nested = BlockSampler::new(BlockKernel::Nested, k).unwrap();
        for _ in 0..50 {
            let mut ops = OpCounter::default();
            nested.sample(&ctx, &hp, &mut rng, &mut ops).unwrap();
            if ops.sampling_stages > stage_bound(k, c) {
                bound_violations += 1;
            }
            blocks_checked += 1;
        }
    }
    let passed = (worst_ratio - 1.0).abs() <= 0.05 && bound_violations == 0;
    Outcome::gate(
        passed,
        format!(
            "density ops / closed form worst {:.4}; / (C+1)^2 K/2 in [{:.2}, {:.2}]; stage bound violations {} of {} draws",
            worst_ratio, leading_ratio_range.0, leading_ratio_range.1, bound_violations, blocks_checked
        ),
    )
}

/// First iteration at which the 10-iteration moving average of the log
/// posterior is within three standard deviations of its final-100 mean.
fn plateau_iteration(trace: &[TraceRecord]) -> usize {
    let lp: Vec<f64> = trace.iter().map(|r| r.log_posterior).collect();
    let tail = &lp[lp.len() - 100..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let sd = (tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (tail.len() - 1) as f64).sqrt();
    let target = mean - 3.0 * sd;
    (10..lp.len())
        .find(|&t| lp[t + 1 - 10..=t].iter().sum::<f64>() / 10.0 >= target)
        .unwrap_or(lp.len())
}

struct MixingRun {
    plateau: [usize; 3],
    perplexity: [f64; 3],
}

const MIXING_KINDS: [SamplerKind; 3] = [SamplerKind::SingleSite, SamplerKind::BlockedNested, SamplerKind::Augmented];

fn mixing_seed(seed: u64) -> MixingRun {
    let cfg = SynthConfig::symmetric(200, 25, 10, 100, 0.1, 0.01, 1_000 + seed);
    let (corpus, _, _) = generate_synthetic(&cfg).unwrap();
    let (train, test) = document_completion_split(&corpus, &SplitSpec::new(25, 0.5, seed)).unwrap();
    let hp = Hyperparams::symmetric(10, 25, 0.1, 0.01).unwrap();
    let mut plateau = [0; 3];
    let mut perplexity = [0.0; 3];
    for (i, kind) in MIXING_KINDS.into_iter().enumerate() {
        let chain = ChainConfig::new(kind, 500, derive_chain_seed(seed, i as u64));
        let out = run_chain(&train, Some(&test), &hp, &chain, &mut NoopObserver).unwrap();
        plateau[i] = plateau_iteration(&out.trace);
        perplexity[i] = out.trace.last().unwrap().perplexity.unwrap();
    }
    MixingRun { plateau, perplexity }
}

fn mixing() -> Outcome {
    const SEEDS: u64 = 30;
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).min(SEEDS as usize);
    let runs: Vec<MixingRun> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                s.spawn(move || {
                    (0..SEEDS)
                        .filter(|seed| *seed as usize % threads == w)
                        .map(|seed| (seed, mixing_seed(seed)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<(u64, MixingRun)> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
        all.sort_by_key(|(seed, _)| *seed);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&MixingRun) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let majority = SEEDS as usize / 2 + 1;
    let mut passed = true;
    let mut parts = Vec::new();
    let aug_plateau = mean(&|r| r.plateau[2] as f64);
    let aug_perp = mean(&|r| r.perplexity[2]);
    for i in 0..2 {
        let faster = runs.iter().filter(|r| r.plateau[i] < r.plateau[2]).count();
        let sharper = runs.iter().filter(|r| r.perplexity[i] <= r.perplexity[2]).count();
        let p = mean(&|r| r.plateau[i] as f64);
        let q = mean(&|r| r.perplexity[i]);
        // Perplexity is the window-averaged final value per seed, compared by
        // majority; cross-seed means are reported only.
        passed &= faster >= majority && p < aug_plateau && sharper >= majority;
        parts.push(format!(
            "{}: plateau {:.1} vs {:.1} ({}/{} seeds earlier), perplexity {:.4} vs {:.4} ({}/{} seeds lower)",
            MIXING_KINDS[i], p, aug_plateau, faster, SEEDS, q, aug_perp, sharper, SEEDS
        ));
    }
    Outcome::gate(passed, parts.join("; "))
}

/// KOS-sized synthetic corpus: 3430 documents, 6906 words, about 467k
/// tokens, with about 63% of tokens in single-occurrence cells.
fn kos_like_corpus() -> Corpus {
    generate_synthetic(&SynthConfig::symmetric(3430, 6906, 50, 136, 0.1, 0.005, 2024)).unwrap().0
}

fn timing_crossover() -> Outcome {
    let corpus = kos_like_corpus();
    let singleton = blocklda::corpus::singleton_fraction(&corpus).unwrap();
    let small = BenchConfig::new(vec![8, 16], vec![SamplerKind::SingleSite, SamplerKind::BlockedBackward], 5, 7);
    let large = BenchConfig::new(vec![1024], vec![SamplerKind::SingleSite, SamplerKind::BlockedNested], 2, 7);
    let rows_small = run_bench(&corpus, &small, |_| {}).unwrap();
    let rows_large = run_bench(&corpus, &large, |_| {}).unwrap();
    let secs = |rows: &[blocklda::bench::BenchRow], k: usize, kind: SamplerKind| {
        rows.iter().find(|r| r.num_topics == k && r.kind == kind).unwrap().mean_sec
    };
    let backward_slower = [8, 16]
        .iter()
        .all(|&k| secs(&rows_small, k, SamplerKind::BlockedBackward) > secs(&rows_small, k, SamplerKind::SingleSite));
    let (single, nested) = (
        secs(&rows_large, 1024, SamplerKind::SingleSite),
        secs(&rows_large, 1024, SamplerKind::BlockedNested),
    );
    let nested_faster = nested < single;
    Outcome {
        passed: backward_slower && nested_faster,
        advisory: true,
        detail: format!(
            "{} tokens, singleton fraction {:.3}; K=8: single {:.4}s backward {:.4}s; K=16: single {:.4}s backward {:.4}s; \
             K=1024: single {:.3}s nested {:.3}s (backward slower at small K: {}, nested faster at K=1024: {})",
            corpus.total_tokens(),
            singleton,
            secs(&rows_small, 8, SamplerKind::SingleSite),
            secs(&rows_small, 8, SamplerKind::BlockedBackward),
            secs(&rows_small, 16, SamplerKind::SingleSite),
            secs(&rows_small, 16, SamplerKind::BlockedBackward),
            single,
            nested,
            backward_slower,
            nested_faster
        ),
    }
}

fn diagnostics_exactness() -> Outcome {
    let mut failures = Vec::new();

    // Uniform model on random document-completion splits.
    let (corpus, _, _) = generate_synthetic(&SynthConfig::symmetric(40, 37, 4, 60, 0.3, 0.05, 5)).unwrap();
    let v = corpus.vocab_size();
    let uniform = ParamEstimate {
        num_topics: 3,
        vocab_size: v,
        theta: vec![1.0 / 3.0; 40 * 3],
        phi: vec![1.0 / v as f64; 3 * v],
    };
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let (_, test) = document_completion_split(&corpus, &SplitSpec::new(5 + seed as usize * 3, 0.5, seed)).unwrap();
        let window = 1 + seed as usize % 4;
        let mut acc = MixtureAccumulator::new(&test, window);
        for _ in 0..window {
            acc.accumulate(&uniform).unwrap();
        }
        let p = acc.perplexity().unwrap();
        worst = worst.max((p - v as f64).abs() / v as f64);
    }
    if worst > 1e-12 {
        failures.push(format!("uniform perplexity rel err {:e}", worst));
    }

    // Prior means at zero counts.
    let empty = Corpus::from_entries(3, 6, []).unwrap();
    let alpha = vec![0.05, 0.3, 1.7, 0.01];
    let hp = Hyperparams::new(alpha.clone(), 0.02, 6).unwrap();
    let state = BlockState::from_block_counts(&empty, 4, &[]).unwrap();
    let est = estimate_params(&state, &hp);
    let alpha_sum: f64 = alpha.iter().sum();
    for d in 0..3 {
        for t in 0..4 {
            if est.theta_row(d)[t] != alpha[t] / alpha_sum {
                failures.push(format!("theta[{}][{}] = {}", d, t, est.theta_row(d)[t]));
            }
        }
    }
    if est.phi.iter().any(|&p| p != 0.02 / (6.0 * 0.02)) {
        failures.push("phi differs from the uniform prior mean".into());
    }

    // Incremental log posterior over 1000 blocked updates.
    let hp = Hyperparams::symmetric(6, 37, 0.1, 0.01).unwrap();
    let mut state = BlockState::init(&corpus, &hp, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut sampler = BlockSampler::new(BlockKernel::Nested, 6).unwrap();
    let mut running = state.log_unnormalized_posterior(&hp);
    let mut worst_drift: f64 = 0.0;
    for _ in 0..1000 {
        let b = rng.random_range(0..state.num_blocks());
        let ctx = state.context_at(b);
        let old = state.block_counts(b);
        let new = sampler.sample(&ctx, &hp, &mut rng, &mut OpCounter::default()).unwrap();
        running += log_posterior_delta(&ctx, &old, &new, &hp);
        state.apply_block_at(b, &new).unwrap();
        worst_drift = worst_drift.max((running - state.log_unnormalized_posterior(&hp)).abs());
    }
    if worst_drift >= 1e-8 {
        failures.push(format!("incremental log posterior drift {:e}", worst_drift));
    }

    Outcome::gate(
        failures.is_empty(),
        format!(
            "uniform perplexity rel err {:.1e}; prior means exact: {}; incremental drift {:.1e}{}",
            worst,
            !failures.iter().any(|f| f.starts_with("theta") || f.starts_with("phi")),
            worst_drift,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _, _) = generate_synthetic(&SynthConfig::symmetric(30, 20, 3, 40, 0.2, 0.05, 77)).unwrap();
    let corpus_path = dir.path().join("docword.txt");
    fs::write(&corpus_path, blocklda::corpus::write_uci_bow(&corpus)).unwrap();
    let mut identical = true;
    let mut compared = 0;
    for kind in SamplerKind::ALL {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{}-{}", kind, rep));
            let cfg = RunConfig {
                corpus: corpus_path.clone(),
                vocab: None,
                kinds: vec![kind],
                num_topics: 4,
                alpha: AlphaSpec::Symmetric(0.1),
                beta: 0.01,
                iterations: 40,
                seed: 31,
                chains: 2,
                holdout: Some(SplitSpec::new(6, 0.5, 31)),
                out,
                order: SweepOrder::Shuffle,
                window: 10,
                run_id: "det".into(),
                checkpoint: None,
                k_sweep: vec![],
                replicates: 1,
            };
            runs.push(cmd_fit(&cfg).unwrap());
        }
        for (a, b) in runs[0].iter().zip(&runs[1]) {
            let (ta, tb) = (fs::read_to_string(&a.trace_path).unwrap(), fs::read_to_string(&b.trace_path).unwrap());
            identical &= strip_wall_time(&ta) == strip_wall_time(&tb);
            identical &= fs::read(&a.checkpoint_path).unwrap() == fs::read(&b.checkpoint_path).unwrap();
            compared += 1;
        }
    }
    Outcome::gate(
        identical,
        format!("{} chain pairs across {} samplers: traces and checkpoints identical = {}", compared, SamplerKind::ALL.len(), identical),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("exact block kernels", kernel_exactness),
        ("stationary distribution", stationarity),
        ("singleton reduction", singleton_reduction),
        ("complexity accounting", complexity_accounting),
        ("mixing on synthetic corpus", mixing),
        ("timing crossover", timing_crossover),
        ("diagnostics exactness", diagnostics_exactness),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut gate_failed = false;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = run();
        let verdict = match (outcome.passed, outcome.advisory) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (advisory, not gating)",
        };
        gate_failed |= !outcome.passed && !outcome.advisory;
        println!(
            "criterion {} [{}]: {} in {:.1}s: {}",
            i + 1,
            name,
            verdict,
            started.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    if gate_failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
