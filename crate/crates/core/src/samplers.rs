//! Full-sweep MCMC kernels and the chain driver.
//!
//! * [`single_site_sweep`]: collapsed Gibbs, one token label at a time.
//! * [`blocked_sweep`]: collapsed Gibbs, one `(d, v)` block at a time, each
//!   composition drawn exactly by backward or nested simulation.
//! * [`augmented_sweep`]: uncollapsed Gibbs alternating Dirichlet draws of
//!   `theta`, `phi` with categorical draws of every label.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::Corpus;
use crate::diagnostics::{MixtureAccumulator, TraceRecord};
use crate::error::{Error, Result};
use crate::kernel::{BlockKernel, BlockSampler, OpCounter, Residuals};
use crate::model::{BlockState, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    SingleSite,
    BlockedBackward,
    BlockedNested,
    Augmented,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::SingleSite,
        SamplerKind::BlockedBackward,
        SamplerKind::BlockedNested,
        SamplerKind::Augmented,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::SingleSite => "single",
            SamplerKind::BlockedBackward => "backward",
            SamplerKind::BlockedNested => "nested",
            SamplerKind::Augmented => "augmented",
        }
    }

    pub fn is_collapsed(self) -> bool {
        self != SamplerKind::Augmented
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown sampler {:?}", s)))
    }
}

/// Block visitation order within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// Ascending `(d, v)`.
    #[default]
    Fixed,
    /// A fresh uniform permutation of the blocks every sweep.
    Shuffle,
}

impl FromStr for SweepOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(SweepOrder::Fixed),
            "shuffle" => Ok(SweepOrder::Shuffle),
            _ => Err(Error::config(format!("unknown sweep order {:?}", s))),
        }
    }
}

fn visit_order<R: Rng + ?Sized>(n: usize, order: SweepOrder, rng: &mut R, buf: &mut Vec<usize>) {
    buf.clear();
    buf.extend(0..n);
    if order == SweepOrder::Shuffle {
        buf.shuffle(rng);
    }
}

/// Single-token collapsed conditional
/// `p(k) ∝ (n_dk + a_k)(n_vk + b) / (n_k + V b)` over residual counts that
/// exclude the token being resampled.
pub fn single_site_conditional(doc: &[u32], word: &[u32], total: &[u32], hp: &Hyperparams) -> Vec<f64> {
    let mut p: Vec<f64> = (0..doc.len())
        .map(|k| {
            (f64::from(doc[k]) + hp.alpha()[k]) * (f64::from(word[k]) + hp.beta())
                / (f64::from(total[k]) + hp.vocab_beta())
        })
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

/// One systematic pass over every token label.
pub fn single_site_sweep<R: Rng + ?Sized>(
    state: &mut BlockState,
    hp: &Hyperparams,
    order: SweepOrder,
    rng: &mut R,
    counter: &mut OpCounter,
) {
    let k = state.num_topics();
    let alpha = hp.alpha().to_vec();
    let (beta, vbeta) = (hp.beta(), hp.vocab_beta());
    let mut cdf = vec![0.0f64; k];
    let mut visit = Vec::new();
    visit_order(state.num_blocks(), order, rng, &mut visit);
    for &b in &visit {
        let parts = state.block_parts_mut(b);
        for label in parts.labels.iter_mut() {
            let old = *label as usize;
            parts.doc[old] -= 1;
            parts.word[old] -= 1;
            parts.total[old] -= 1;

            let mut acc = 0.0;
            for t in 0..k {
                acc += (f64::from(parts.doc[t]) + alpha[t]) * (f64::from(parts.word[t]) + beta)
                    / (f64::from(parts.total[t]) + vbeta);
                cdf[t] = acc;
            }
            let u = rng.random::<f64>() * acc;
            let new = cdf.partition_point(|&c| c <= u).min(k - 1);

            parts.doc[new] += 1;
            parts.word[new] += 1;
            parts.total[new] += 1;
            *label = new as u32;
            counter.density_ops += k as u64;
            counter.sampling_stages += 1;
            counter.categorical_draws += 1;
        }
    }
}

/// One pass redrawing every block's composition from its exact conditional.
pub fn blocked_sweep<R: Rng + ?Sized>(
    state: &mut BlockState,
    hp: &Hyperparams,
    sampler: &mut BlockSampler,
    order: SweepOrder,
    rng: &mut R,
    counter: &mut OpCounter,
) -> Result<()> {
    let mut visit = Vec::new();
    visit_order(state.num_blocks(), order, rng, &mut visit);
    for &b in &visit {
        state.remove_block(b);
        {
            let parts = state.block_parts_mut(b);
            let res = Residuals {
                doc: parts.doc,
                word: parts.word,
                total: parts.total,
            };
            sampler.draw(&res, hp, rng, counter, parts.labels)?;
        }
        state.insert_block(b);
    }
    Ok(())
}

/// Draws from `Dirichlet(concentration)` through normalized gamma variates,
/// computed in log space so tiny concentrations do not underflow to an
/// all-zero vector.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut out = vec![0.0; concentration.len()];
    sample_dirichlet_into(concentration, rng, &mut out)?;
    Ok(out)
}

fn sample_dirichlet_into<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R, out: &mut [f64]) -> Result<()> {
    if concentration.is_empty() {
        return Err(Error::config("Dirichlet needs at least one concentration"));
    }
    let mut best = f64::NEG_INFINITY;
    for (x, &a) in out.iter_mut().zip(concentration) {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::config(format!("Dirichlet concentration {} is not positive", a)));
        }
        // Gamma(a) = Gamma(a + 1) * U^(1/a).
        let g: f64 = Gamma::new(a + 1.0, 1.0)
            .map_err(|e| Error::config(e.to_string()))?
            .sample(rng);
        let u = 1.0 - rng.random::<f64>();
        *x = g.ln() + u.ln() / a;
        best = best.max(*x);
    }
    let mut s = 0.0;
    for x in out.iter_mut() {
        *x = (*x - best).exp();
        s += *x;
    }
    out.iter_mut().for_each(|x| *x /= s);
    Ok(())
}

/// State of the data-augmentation sampler: explicit `theta` (`D x K`) and
/// `phi` (`K x V`) alongside the label counts.
#[derive(Debug, Clone)]
pub struct AugmentedState {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub counts: BlockState,
}

impl AugmentedState {
    /// Wraps a count state with uniform `theta` and `phi`.
    pub fn new(counts: BlockState) -> Self {
        let (d, k, v) = (counts.num_docs(), counts.num_topics(), counts.vocab_size());
        AugmentedState {
            theta: vec![1.0 / k as f64; d * k],
            phi: vec![1.0 / v as f64; k * v],
            counts,
        }
    }

    pub fn theta_row(&self, doc: usize) -> &[f64] {
        let k = self.counts.num_topics();
        &self.theta[doc * k..(doc + 1) * k]
    }

    pub fn phi_row(&self, topic: usize) -> &[f64] {
        let v = self.counts.vocab_size();
        &self.phi[topic * v..(topic + 1) * v]
    }
}

/// `theta_d | z`, `phi_k | z`, then every label `z | theta, phi`.
pub fn augmented_sweep<R: Rng + ?Sized>(
    astate: &mut AugmentedState,
    hp: &Hyperparams,
    order: SweepOrder,
    rng: &mut R,
    counter: &mut OpCounter,
) -> Result<()> {
    let state = &mut astate.counts;
    let (d_count, k, v_count) = (state.num_docs(), state.num_topics(), state.vocab_size());

    let mut conc = vec![0.0; k];
    for d in 0..d_count {
        for (t, c) in conc.iter_mut().enumerate() {
            *c = f64::from(state.doc_topic(d)[t]) + hp.alpha()[t];
        }
        sample_dirichlet_into(&conc, rng, &mut astate.theta[d * k..(d + 1) * k])?;
    }
    let mut conc = vec![0.0; v_count];
    for t in 0..k {
        for (v, c) in conc.iter_mut().enumerate() {
            *c = f64::from(state.word_topic(v)[t]) + hp.beta();
        }
        sample_dirichlet_into(&conc, rng, &mut astate.phi[t * v_count..(t + 1) * v_count])?;
    }

    let mut cdf = vec![0.0f64; k];
    let mut visit = Vec::new();
    visit_order(state.num_blocks(), order, rng, &mut visit);
    for &b in &visit {
        let block = state.blocks()[b];
        let (d, v) = (block.doc as usize, block.word as usize);
        let mut acc = 0.0;
        for t in 0..k {
            acc += astate.theta[d * k + t] * astate.phi[t * v_count + v];
            cdf[t] = acc;
        }
        counter.density_ops += k as u64;
        let parts = state.block_parts_mut(b);
        for label in parts.labels.iter_mut() {
            let old = *label as usize;
            let u = rng.random::<f64>() * acc;
            let new = cdf.partition_point(|&c| c <= u).min(k - 1);
            parts.doc[old] -= 1;
            parts.word[old] -= 1;
            parts.total[old] -= 1;
            parts.doc[new] += 1;
            parts.word[new] += 1;
            parts.total[new] += 1;
            *label = new as u32;
            counter.sampling_stages += 1;
            counter.categorical_draws += 1;
        }
    }
    Ok(())
}

/// Per-chain seed: SplitMix64 finalizer applied to `base + (chain + 1) * golden`.
pub fn derive_chain_seed(base: u64, chain: u64) -> u64 {
    let mut z = base.wrapping_add((chain + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Any of the four samplers behind one sweep call.
pub struct Sweeper {
    kind: SamplerKind,
    block: Option<BlockSampler>,
    augmented: Option<AugmentedState>,
    state: Option<BlockState>,
}

impl Sweeper {
    pub fn new(kind: SamplerKind, state: BlockState) -> Result<Self> {
        let k = state.num_topics();
        let block = match kind {
            SamplerKind::BlockedBackward => Some(BlockSampler::new(BlockKernel::Backward, k)?),
            SamplerKind::BlockedNested => Some(BlockSampler::new(BlockKernel::Nested, k)?),
            _ => None,
        };
        let (augmented, state) = if kind == SamplerKind::Augmented {
            (Some(AugmentedState::new(state)), None)
        } else {
            (None, Some(state))
        };
        Ok(Sweeper {
            kind,
            block,
            augmented,
            state,
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn state(&self) -> &BlockState {
        match &self.augmented {
            Some(a) => &a.counts,
            None => self.state.as_ref().expect("collapsed sampler owns a state"),
        }
    }

    pub fn into_state(self) -> BlockState {
        match self.augmented {
            Some(a) => a.counts,
            None => self.state.expect("collapsed sampler owns a state"),
        }
    }

    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        hp: &Hyperparams,
        order: SweepOrder,
        rng: &mut R,
        counter: &mut OpCounter,
    ) -> Result<()> {
        match self.kind {
            SamplerKind::SingleSite => {
                single_site_sweep(self.state.as_mut().expect("state"), hp, order, rng, counter);
                Ok(())
            }
            SamplerKind::BlockedBackward | SamplerKind::BlockedNested => blocked_sweep(
                self.state.as_mut().expect("state"),
                hp,
                self.block.as_mut().expect("block sampler"),
                order,
                rng,
                counter,
            ),
            SamplerKind::Augmented => augmented_sweep(self.augmented.as_mut().expect("augmented state"), hp, order, rng, counter),
        }
    }
}

/// Settings of one chain.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub kind: SamplerKind,
    pub iterations: usize,
    pub seed: u64,
    pub order: SweepOrder,
    /// Perplexity window length `L`.
    pub window: usize,
    /// Evaluate the log posterior every iteration (otherwise only at the
    /// initial and final records).
    pub log_posterior_every_iteration: bool,
}

impl ChainConfig {
    pub fn new(kind: SamplerKind, iterations: usize, seed: u64) -> Self {
        ChainConfig {
            kind,
            iterations,
            seed,
            order: SweepOrder::Fixed,
            window: 10,
            log_posterior_every_iteration: true,
        }
    }
}

/// Receives trace records as the chain produces them.
pub trait ChainObserver {
    fn on_record(&mut self, record: &TraceRecord);
}

pub struct NoopObserver;

impl ChainObserver for NoopObserver {
    fn on_record(&mut self, _record: &TraceRecord) {}
}

impl<F: FnMut(&TraceRecord)> ChainObserver for F {
    fn on_record(&mut self, record: &TraceRecord) {
        self(record)
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub trace: Vec<TraceRecord>,
    pub state: BlockState,
}

/// Runs one chain: random initial labels, `iterations` sweeps, one trace
/// record per iteration (plus the initial record at iteration 0).
///
/// With a `test` corpus, mixture probabilities `sum_k theta_dk phi_kv` are
/// averaged over disjoint windows of `window` iterations and the held-out
/// perplexity is attached to the record closing each window.
pub fn run_chain(
    train: &Corpus,
    test: Option<&Corpus>,
    hp: &Hyperparams,
    cfg: &ChainConfig,
    observer: &mut dyn ChainObserver,
) -> Result<ChainOutput> {
    check_chain(train.num_docs(), train.vocab_size(), test, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let state = BlockState::init_with_rng(train, hp, &mut rng)?;
    drive(state, test, hp, cfg, &mut rng, observer)
}

/// As [`run_chain`], continuing from `state` instead of a random start.
/// Iteration numbers restart at 0.
pub fn run_chain_from(
    state: BlockState,
    test: Option<&Corpus>,
    hp: &Hyperparams,
    cfg: &ChainConfig,
    observer: &mut dyn ChainObserver,
) -> Result<ChainOutput> {
    check_chain(state.num_docs(), state.vocab_size(), test, cfg)?;
    if state.num_topics() != hp.num_topics() {
        return Err(Error::config(format!(
            "state has {} topics, hyperparameters {}",
            state.num_topics(),
            hp.num_topics()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    drive(state, test, hp, cfg, &mut rng, observer)
}

fn check_chain(num_docs: usize, vocab_size: usize, test: Option<&Corpus>, cfg: &ChainConfig) -> Result<()> {
    if cfg.window == 0 {
        return Err(Error::config("perplexity window must be at least 1"));
    }
    if let Some(t) = test {
        if (t.num_docs(), t.vocab_size()) != (num_docs, vocab_size) {
            return Err(Error::config("test corpus dimensions differ from training corpus"));
        }
    }
    Ok(())
}

fn drive(
    state: BlockState,
    test: Option<&Corpus>,
    hp: &Hyperparams,
    cfg: &ChainConfig,
    rng: &mut ChaCha8Rng,
    observer: &mut dyn ChainObserver,
) -> Result<ChainOutput> {
    let mut accumulator = test.map(|t| MixtureAccumulator::new(t, cfg.window));

    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let first = TraceRecord {
        iteration: 0,
        log_posterior: state.log_unnormalized_posterior(hp),
        perplexity: None,
        density_ops: 0,
        sampling_stages: 0,
        wall_time: 0.0,
    };
    observer.on_record(&first);
    trace.push(first);

    let mut sweeper = Sweeper::new(cfg.kind, state)?;
    for iteration in 1..=cfg.iterations {
        let mut counter = OpCounter::default();
        let started = Instant::now();
        sweeper.sweep(hp, cfg.order, rng, &mut counter)?;
        let wall_time = started.elapsed().as_secs_f64();

        let state = sweeper.state();
        let log_posterior = if cfg.log_posterior_every_iteration || iteration == cfg.iterations {
            state.log_unnormalized_posterior(hp)
        } else {
            f64::NAN
        };
        let mut perplexity = None;
        if let Some(acc) = accumulator.as_mut() {
            acc.accumulate_state(state, hp)?;
            if acc.is_full() {
                perplexity = Some(acc.perplexity()?);
                acc.reset();
            }
        }
        let record = TraceRecord {
            iteration,
            log_posterior,
            perplexity,
            density_ops: counter.density_ops,
            sampling_stages: counter.sampling_stages,
            wall_time,
        };
        observer.on_record(&record);
        trace.push(record);
    }
    Ok(ChainOutput {
        trace,
        state: sweeper.into_state(),
    })
}
