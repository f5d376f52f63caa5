//! Command-line front end: `fit`, `eval`, `synth`, `bench` and `inspect`.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_bench, write_bench_csv, BenchConfig, BenchRow, DEFAULT_K_SWEEP};
use crate::corpus::{
    document_completion_split, generate_synthetic, parse_uci_bow, singleton_fraction, write_uci_bow_to,
    write_vocab_to, Corpus, SplitSpec, SynthConfig,
};
use crate::diagnostics::{emit_trace, trace_file_name, TraceRecord};
use crate::error::{Error, Result};
use crate::model::{read_checkpoint, write_checkpoint, BlockState, Hyperparams};
use crate::samplers::{derive_chain_seed, run_chain, run_chain_from, ChainConfig, NoopObserver, SamplerKind, SweepOrder};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

/// Process exit code for an error: 2 configuration, 3 I/O, 4 malformed or
/// unusable data, 5 numerical or internal failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::GuardExceeded(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::Parse { .. } | Error::UnknownBlock { .. } | Error::CountMismatch { .. } | Error::EmptyCorpus => {
            EXIT_DATA
        }
        Error::Numerical(_) | Error::Invariant(_) => EXIT_INTERNAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "blocklda", version, about = "Exact blocked Gibbs sampling for latent Dirichlet allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more chains and write a trace CSV and final checkpoint per chain.
    Fit(RunArgs),
    /// Report held-out perplexity on a document-completion split.
    Eval(RunArgs),
    /// Generate a synthetic corpus from the generative model.
    Synth(SynthArgs),
    /// Time one sweep per sampler across a range of topic counts.
    Bench(RunArgs),
    /// Print corpus statistics.
    Inspect(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// UCI bag-of-words file (docword format).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Vocabulary file, one word per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// single, backward, nested or augmented. Bench accepts a comma-separated list.
    #[arg(long, default_value = "nested")]
    pub sampler: String,
    #[arg(long = "topics", short = 'k', default_value_t = 10)]
    pub topics: usize,
    /// Symmetric value, or a file holding one value per topic.
    #[arg(long, default_value = "0.1")]
    pub alpha: String,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long = "holdout-docs", default_value_t = 0)]
    pub holdout_docs: usize,
    #[arg(long = "holdout-frac", default_value_t = 0.5)]
    pub holdout_frac: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long = "sweep-order", default_value = "fixed")]
    pub sweep_order: String,
    /// Perplexity averaging window, in iterations.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Prefix of output file names.
    #[arg(long = "run-id", default_value = "run")]
    pub run_id: String,
    /// Start from this checkpoint (eval only).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Comma-separated topic counts (bench only).
    #[arg(long = "k-sweep")]
    pub k_sweep: Option<String>,
    /// Timed sweeps per cell (bench only).
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub docs: usize,
    #[arg(long = "vocab-size", default_value_t = 25)]
    pub vocab_size: usize,
    #[arg(long = "doc-length", default_value_t = 100)]
    pub doc_length: usize,
    #[arg(long = "topics", short = 'k', default_value_t = 10)]
    pub topics: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Prefix of output file names.
    #[arg(long = "run-id", default_value = "synth")]
    pub run_id: String,
}

/// Validated settings shared by `fit`, `eval`, `bench` and `inspect`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub vocab: Option<PathBuf>,
    pub kinds: Vec<SamplerKind>,
    pub num_topics: usize,
    pub alpha: AlphaSpec,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub chains: usize,
    pub holdout: Option<SplitSpec>,
    pub out: PathBuf,
    pub order: SweepOrder,
    pub window: usize,
    pub run_id: String,
    pub checkpoint: Option<PathBuf>,
    pub k_sweep: Vec<usize>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec {
    Symmetric(f64),
    PerTopic(Vec<f64>),
}

impl AlphaSpec {
    /// A number, or else a path to a whitespace-separated list of numbers.
    pub fn parse(text: &str) -> Result<Self> {
        if let Ok(a) = text.trim().parse::<f64>() {
            return Ok(AlphaSpec::Symmetric(a));
        }
        let body = fs::read_to_string(text)?;
        let values = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::config(format!("bad alpha value {:?} in {}", t, text))))
            .collect::<Result<Vec<_>>>()?;
        Ok(AlphaSpec::PerTopic(values))
    }

    pub fn hyperparams(&self, num_topics: usize, vocab_size: usize, beta: f64) -> Result<Hyperparams> {
        match self {
            AlphaSpec::Symmetric(a) => Hyperparams::symmetric(num_topics, vocab_size, *a, beta),
            AlphaSpec::PerTopic(v) if v.len() == num_topics => Hyperparams::new(v.clone(), beta, vocab_size),
            AlphaSpec::PerTopic(v) => Err(Error::config(format!("{} alpha values for {} topics", v.len(), num_topics))),
        }
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::config(format!("bad {} {:?}", what, t))))
        .collect()
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let corpus = args.corpus.clone().ok_or_else(|| Error::config("--corpus is required"))?;
        if args.topics == 0 {
            return Err(Error::config("--topics must be at least 1"));
        }
        if args.chains == 0 {
            return Err(Error::config("--chains must be at least 1"));
        }
        let kinds = args
            .sampler
            .split(',')
            .map(|s| s.trim().parse::<SamplerKind>())
            .collect::<Result<Vec<_>>>()?;
        let k_sweep = match &args.k_sweep {
            Some(t) => parse_list(t, "topic count")?,
            None => DEFAULT_K_SWEEP.to_vec(),
        };
        if k_sweep.contains(&0) {
            return Err(Error::config("topic counts must be at least 1"));
        }
        let holdout = (args.holdout_docs > 0).then(|| SplitSpec::new(args.holdout_docs, args.holdout_frac, args.seed));
        Ok(RunConfig {
            corpus,
            vocab: args.vocab.clone(),
            kinds,
            num_topics: args.topics,
            alpha: AlphaSpec::parse(&args.alpha)?,
            beta: args.beta,
            iterations: args.iters,
            seed: args.seed,
            chains: args.chains,
            holdout,
            out: args.out.clone(),
            order: args.sweep_order.parse()?,
            window: args.window,
            run_id: args.run_id.clone(),
            checkpoint: args.checkpoint.clone(),
            k_sweep,
            replicates: args.replicates,
        })
    }

    fn single_kind(&self) -> Result<SamplerKind> {
        match self.kinds.as_slice() {
            [k] => Ok(*k),
            _ => Err(Error::config("exactly one --sampler is needed for this command")),
        }
    }

    fn hyperparams(&self, vocab_size: usize) -> Result<Hyperparams> {
        self.alpha.hyperparams(self.num_topics, vocab_size, self.beta)
    }

    fn chain_config(&self, kind: SamplerKind, chain: usize) -> ChainConfig {
        ChainConfig {
            order: self.order,
            window: self.window,
            ..ChainConfig::new(kind, self.iterations, derive_chain_seed(self.seed, chain as u64))
        }
    }
}

pub fn load_corpus(path: &Path, vocab: Option<&Path>) -> Result<Corpus> {
    let docs = BufReader::new(File::open(path)?);
    match vocab {
        Some(v) => parse_uci_bow(docs, Some(BufReader::new(File::open(v)?))),
        None => parse_uci_bow(docs, None::<BufReader<File>>),
    }
}

fn load_split(cfg: &RunConfig) -> Result<(Corpus, Option<Corpus>)> {
    let corpus = load_corpus(&cfg.corpus, cfg.vocab.as_deref())?;
    match &cfg.holdout {
        Some(spec) => {
            let (train, test) = document_completion_split(&corpus, spec)?;
            Ok((train, Some(test)))
        }
        None => Ok((corpus, None)),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn checkpoint_file_name(run_id: &str, chain: usize) -> String {
    format!("{}.{}.checkpoint", run_id, chain)
}

/// Summary of one fitted chain.
#[derive(Debug, Clone)]
pub struct ChainSummary {
    pub chain: usize,
    pub seed: u64,
    pub trace_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub final_record: TraceRecord,
}

/// Runs `cfg.chains` chains in parallel. Chain `c` uses seed
/// `derive_chain_seed(seed, c)`.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<ChainSummary>> {
    let kind = cfg.single_kind()?;
    let (train, test) = load_split(cfg)?;
    let hp = cfg.hyperparams(train.vocab_size())?;
    fs::create_dir_all(&cfg.out)?;

    let results: Vec<Result<ChainSummary>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|chain| {
                let (train, test, hp) = (&train, test.as_ref(), &hp);
                scope.spawn(move || -> Result<ChainSummary> {
                    let chain_cfg = cfg.chain_config(kind, chain);
                    let out = run_chain(train, test, hp, &chain_cfg, &mut NoopObserver)?;
                    let trace_path = cfg.out.join(trace_file_name(&cfg.run_id, chain));
                    emit_trace(&out.trace, create(&trace_path)?)?;
                    let checkpoint_path = cfg.out.join(checkpoint_file_name(&cfg.run_id, chain));
                    write_checkpoint(&out.state, chain_cfg.seed, cfg.iterations, create(&checkpoint_path)?)?;
                    Ok(ChainSummary {
                        chain,
                        seed: chain_cfg.seed,
                        trace_path,
                        checkpoint_path,
                        final_record: out.trace.last().cloned().expect("trace has an initial record"),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Invariant("chain thread panicked".into()))))
            .collect()
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub chain: usize,
    pub iteration: usize,
    pub perplexity: f64,
}

/// Runs the chains on the training half of the split and reports the
/// perplexity of the last complete window. With `--checkpoint`, chains start
/// from that state.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    let kind = cfg.single_kind()?;
    if cfg.holdout.is_none() {
        return Err(Error::config("eval needs --holdout-docs"));
    }
    if cfg.iterations < cfg.window {
        return Err(Error::config(format!(
            "--iters {} is shorter than the perplexity window {}",
            cfg.iterations, cfg.window
        )));
    }
    let (train, test) = load_split(cfg)?;
    let test = test.expect("split requested");
    let hp = cfg.hyperparams(train.vocab_size())?;
    let start = match &cfg.checkpoint {
        Some(path) => Some(read_checkpoint(BufReader::new(File::open(path)?), &train)?.0),
        None => None,
    };
    let mut reports = Vec::with_capacity(cfg.chains);
    for chain in 0..cfg.chains {
        let chain_cfg = cfg.chain_config(kind, chain);
        let out = match &start {
            Some(state) => run_chain_from(state.clone(), Some(&test), &hp, &chain_cfg, &mut NoopObserver)?,
            None => run_chain(&train, Some(&test), &hp, &chain_cfg, &mut NoopObserver)?,
        };
        let last = out
            .trace
            .iter()
            .rev()
            .find(|r| r.perplexity.is_some())
            .ok_or_else(|| Error::Invariant("no complete perplexity window".into()))?;
        reports.push(EvalReport {
            chain,
            iteration: last.iteration,
            perplexity: last.perplexity.expect("filtered"),
        });
    }
    Ok(reports)
}

/// Writes `<run-id>.docword.txt` and `<run-id>.vocab.txt`; returns the corpus.
pub fn cmd_synth(args: &SynthArgs) -> Result<Corpus> {
    let cfg = SynthConfig::symmetric(
        args.docs,
        args.vocab_size,
        args.topics,
        args.doc_length,
        args.alpha,
        args.beta,
        args.seed,
    );
    let (corpus, _, _) = generate_synthetic(&cfg)?;
    fs::create_dir_all(&args.out)?;
    write_uci_bow_to(&corpus, create(&args.out.join(format!("{}.docword.txt", args.run_id)))?)?;
    let labels: Vec<String> = (1..=args.vocab_size).map(|v| format!("w{}", v)).collect();
    write_vocab_to(&labels, create(&args.out.join(format!("{}.vocab.txt", args.run_id)))?)?;
    Ok(corpus)
}

/// Writes `<run-id>.bench.csv`, one row per `(K, sampler)`.
pub fn cmd_bench(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    let corpus = load_corpus(&cfg.corpus, cfg.vocab.as_deref())?;
    let alpha = match cfg.alpha {
        AlphaSpec::Symmetric(a) => a,
        AlphaSpec::PerTopic(_) => return Err(Error::config("bench needs a symmetric --alpha")),
    };
    let bench = BenchConfig {
        alpha,
        beta: cfg.beta,
        order: cfg.order,
        ..BenchConfig::new(cfg.k_sweep.clone(), cfg.kinds.clone(), cfg.replicates, cfg.seed)
    };
    let rows = run_bench(&corpus, &bench, |row| {
        eprintln!("K={} {} {:.6}s", row.num_topics, row.kind, row.mean_sec);
    })?;
    fs::create_dir_all(&cfg.out)?;
    write_bench_csv(&rows, create(&cfg.out.join(format!("{}.bench.csv", cfg.run_id)))?)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub num_docs: usize,
    pub vocab_size: usize,
    pub total_tokens: u64,
    pub singleton_fraction: f64,
    pub max_count: u32,
    /// `histogram[c]` blocks hold `c` tokens.
    pub histogram: Vec<u64>,
}

pub fn summarize(corpus: &Corpus) -> Result<CorpusSummary> {
    Ok(CorpusSummary {
        num_docs: corpus.num_docs(),
        vocab_size: corpus.vocab_size(),
        total_tokens: corpus.total_tokens(),
        singleton_fraction: singleton_fraction(corpus)?,
        max_count: corpus.max_count(),
        histogram: corpus.block_size_histogram(),
    })
}

pub fn cmd_inspect(cfg: &RunConfig) -> Result<CorpusSummary> {
    summarize(&load_corpus(&cfg.corpus, cfg.vocab.as_deref())?)
}

pub fn write_summary<W: Write>(s: &CorpusSummary, mut sink: W) -> io::Result<()> {
    writeln!(sink, "documents\t{}", s.num_docs)?;
    writeln!(sink, "vocabulary\t{}", s.vocab_size)?;
    writeln!(sink, "tokens\t{}", s.total_tokens)?;
    writeln!(sink, "singleton_fraction\t{:.6}", s.singleton_fraction)?;
    writeln!(sink, "max_count\t{}", s.max_count)?;
    writeln!(sink, "block_sizes")?;
    for (c, &n) in s.histogram.iter().enumerate().filter(|(_, &n)| n > 0) {
        writeln!(sink, "{}\t{}", c, n)?;
    }
    Ok(())
}

/// Dispatches a parsed command line, printing results to stdout.
pub fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Fit(args) => {
            for s in cmd_fit(&RunConfig::from_args(&args)?)? {
                writeln!(
                    out,
                    "chain {} seed {} log_posterior {} -> {}",
                    s.chain,
                    s.seed,
                    s.final_record.log_posterior,
                    s.trace_path.display()
                )?;
            }
        }
        Command::Eval(args) => {
            for r in cmd_eval(&RunConfig::from_args(&args)?)? {
                writeln!(out, "chain {} iteration {} perplexity {}", r.chain, r.iteration, r.perplexity)?;
            }
        }
        Command::Synth(args) => {
            let c = cmd_synth(&args)?;
            writeln!(out, "wrote {} documents, {} tokens", c.num_docs(), c.total_tokens())?;
        }
        Command::Bench(args) => {
            let rows = cmd_bench(&RunConfig::from_args(&args)?)?;
            write_bench_csv(&rows, &mut out)?;
        }
        Command::Inspect(args) => {
            write_summary(&cmd_inspect(&RunConfig::from_args(&args)?)?, &mut out)?;
        }
    }
    Ok(())
}

/// Loads a checkpoint against a corpus file; used by tests and examples.
pub fn load_checkpoint(path: &Path, corpus: &Corpus) -> Result<BlockState> {
    Ok(read_checkpoint(BufReader::new(File::open(path)?), corpus)?.0)
}
