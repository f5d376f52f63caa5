//! Model hyperparameters and the block-count state shared by every sampler.
//!
//! The document-topic counts `S_d.k` of the collapsed posterior and the
//! marginal block counts `n_d.k` are the same quantity, as are `S_.vk`/`n_.vk`
//! and `S_..k`/`n_..k`; the state keeps a single copy of each.
//!
//! A block's composition `(n_dv1, ..., n_dvK)` is stored as the multiset of
//! its `C_dv` topic labels rather than a dense `K`-vector, which keeps memory
//! proportional to the number of tokens for large `K`. Blocked sweeps write
//! the multiset back in ascending topic order; single-site sweeps update one
//! label at a time.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Dirichlet concentrations and model dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    num_topics: usize,
    vocab_size: usize,
    alpha: Vec<f64>,
    beta: f64,
    alpha_sum: f64,
    vocab_beta: f64,
}

impl Hyperparams {
    pub fn new(alpha: Vec<f64>, beta: f64, vocab_size: usize) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::config("need at least one topic"));
        }
        if vocab_size == 0 {
            return Err(Error::config("vocabulary size must be positive"));
        }
        if alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::config("alpha entries must be positive and finite"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config("beta must be positive and finite"));
        }
        let alpha_sum = alpha.iter().sum();
        Ok(Hyperparams {
            num_topics: alpha.len(),
            vocab_size,
            alpha,
            beta,
            alpha_sum,
            vocab_beta: vocab_size as f64 * beta,
        })
    }

    pub fn symmetric(num_topics: usize, vocab_size: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha; num_topics], beta, vocab_size)
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha_sum
    }

    /// `V * beta`.
    pub fn vocab_beta(&self) -> f64 {
        self.vocab_beta
    }
}

/// Location of one `(document, word)` block in the label array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub doc: u32,
    pub word: u32,
    start: u32,
    len: u32,
}

impl Block {
    /// `C_dv`.
    pub fn size(&self) -> usize {
        self.len as usize
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.start as usize..(self.start + self.len) as usize
    }
}

/// Counts excluding one block: `n_d.k - n_dvk`, `n_.vk - n_dvk`, `n_..k - n_dvk`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockContext {
    pub residual_doc: Vec<u32>,
    pub residual_word: Vec<u32>,
    pub residual_total: Vec<u32>,
    pub block_size: u32,
}

impl BlockContext {
    pub fn num_topics(&self) -> usize {
        self.residual_doc.len()
    }
}

/// Topic counts for every block plus the three aggregate count tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockState {
    num_topics: usize,
    num_docs: usize,
    vocab_size: usize,
    blocks: Vec<Block>,
    doc_block_offsets: Vec<usize>,
    labels: Vec<u32>,
    doc_topic: Vec<u32>,
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
}

impl BlockState {
    fn skeleton(corpus: &Corpus, num_topics: usize) -> Result<Self> {
        if num_topics == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        let total = corpus.total_tokens();
        if total > u64::from(u32::MAX) {
            return Err(Error::config("corpus too large for 32-bit counts"));
        }
        let mut blocks = Vec::with_capacity(corpus.num_entries());
        let mut doc_block_offsets = vec![0usize; corpus.num_docs() + 1];
        let mut start = 0u32;
        for e in corpus.entries() {
            blocks.push(Block {
                doc: e.doc,
                word: e.word,
                start,
                len: e.count,
            });
            start += e.count;
            doc_block_offsets[e.doc as usize + 1] += 1;
        }
        for d in 0..corpus.num_docs() {
            doc_block_offsets[d + 1] += doc_block_offsets[d];
        }
        Ok(BlockState {
            num_topics,
            num_docs: corpus.num_docs(),
            vocab_size: corpus.vocab_size(),
            blocks,
            doc_block_offsets,
            labels: vec![0; start as usize],
            doc_topic: vec![0; corpus.num_docs() * num_topics],
            word_topic: vec![0; corpus.vocab_size() * num_topics],
            topic_total: vec![0; num_topics],
        })
    }

    /// Assigns every token an independent uniform topic.
    pub fn init(corpus: &Corpus, hp: &Hyperparams, seed: u64) -> Result<Self> {
        Self::init_with_rng(corpus, hp, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn init_with_rng<R: Rng + ?Sized>(corpus: &Corpus, hp: &Hyperparams, rng: &mut R) -> Result<Self> {
        if corpus.total_tokens() == 0 {
            return Err(Error::EmptyCorpus);
        }
        check_vocab(corpus, hp)?;
        let mut state = Self::skeleton(corpus, hp.num_topics())?;
        let k = state.num_topics as u32;
        for label in &mut state.labels {
            *label = rng.random_range(0..k);
        }
        for b in 0..state.blocks.len() {
            state.labels[state.blocks[b].range()].sort_unstable();
        }
        state.recompute_aggregates();
        Ok(state)
    }

    /// Builds a state from dense per-block compositions given in corpus entry order.
    pub fn from_block_counts(corpus: &Corpus, num_topics: usize, counts: &[Vec<u32>]) -> Result<Self> {
        let mut state = Self::skeleton(corpus, num_topics)?;
        if counts.len() != state.blocks.len() {
            return Err(Error::config(format!(
                "{} compositions given for {} blocks",
                counts.len(),
                state.blocks.len()
            )));
        }
        for (b, n) in counts.iter().enumerate() {
            if n.len() != num_topics {
                return Err(Error::config(format!("composition {} has {} topics, K = {}", b, n.len(), num_topics)));
            }
            let block = state.blocks[b];
            let sum: u64 = n.iter().map(|&x| u64::from(x)).sum();
            if sum != block.len as u64 {
                return Err(Error::CountMismatch {
                    expected: block.len as u64,
                    got: sum,
                });
            }
            write_composition(&mut state.labels[block.range()], n);
        }
        state.recompute_aggregates();
        Ok(state)
    }

    fn recompute_aggregates(&mut self) {
        let k = self.num_topics;
        self.doc_topic.iter_mut().for_each(|x| *x = 0);
        self.word_topic.iter_mut().for_each(|x| *x = 0);
        self.topic_total.iter_mut().for_each(|x| *x = 0);
        for block in &self.blocks {
            for &t in &self.labels[block.range()] {
                let t = t as usize;
                self.doc_topic[block.doc as usize * k + t] += 1;
                self.word_topic[block.word as usize * k + t] += 1;
                self.topic_total[t] += 1;
            }
        }
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn total_tokens(&self) -> u64 {
        self.labels.len() as u64
    }

    /// Index of block `(doc, word)` in sweep order.
    pub fn block_index(&self, doc: usize, word: usize) -> Result<usize> {
        if doc >= self.num_docs {
            return Err(Error::UnknownBlock { doc, word });
        }
        let range = self.doc_block_offsets[doc]..self.doc_block_offsets[doc + 1];
        self.blocks[range.clone()]
            .binary_search_by_key(&(word as u32), |b| b.word)
            .map(|i| range.start + i)
            .map_err(|_| Error::UnknownBlock { doc, word })
    }

    /// Dense composition `(n_dvk)_k` of block `b`.
    pub fn block_counts(&self, b: usize) -> Vec<u32> {
        let mut n = vec![0u32; self.num_topics];
        for &t in &self.labels[self.blocks[b].range()] {
            n[t as usize] += 1;
        }
        n
    }

    /// The topic labels of block `b` (a multiset; order carries no meaning
    /// for the collapsed posterior).
    pub fn block_labels(&self, b: usize) -> &[u32] {
        &self.labels[self.blocks[b].range()]
    }

    pub fn doc_topic(&self, doc: usize) -> &[u32] {
        &self.doc_topic[doc * self.num_topics..(doc + 1) * self.num_topics]
    }

    pub fn word_topic(&self, word: usize) -> &[u32] {
        &self.word_topic[word * self.num_topics..(word + 1) * self.num_topics]
    }

    pub fn topic_total(&self) -> &[u32] {
        &self.topic_total
    }

    /// Residual counts for block `(doc, word)`.
    pub fn extract_context(&self, doc: usize, word: usize) -> Result<BlockContext> {
        let b = self.block_index(doc, word)?;
        Ok(self.context_at(b))
    }

    pub fn context_at(&self, b: usize) -> BlockContext {
        let block = self.blocks[b];
        let mut residual_doc = self.doc_topic(block.doc as usize).to_vec();
        let mut residual_word = self.word_topic(block.word as usize).to_vec();
        let mut residual_total = self.topic_total.clone();
        for &t in &self.labels[block.range()] {
            let t = t as usize;
            residual_doc[t] -= 1;
            residual_word[t] -= 1;
            residual_total[t] -= 1;
        }
        BlockContext {
            residual_doc,
            residual_word,
            residual_total,
            block_size: block.len,
        }
    }

    /// Replaces the composition of block `(doc, word)`.
    pub fn apply_block(&mut self, doc: usize, word: usize, new_counts: &[u32]) -> Result<()> {
        let b = self.block_index(doc, word)?;
        self.apply_block_at(b, new_counts)
    }

    pub fn apply_block_at(&mut self, b: usize, new_counts: &[u32]) -> Result<()> {
        let block = self.blocks[b];
        if new_counts.len() != self.num_topics {
            return Err(Error::config(format!(
                "composition has {} topics, K = {}",
                new_counts.len(),
                self.num_topics
            )));
        }
        let sum: u64 = new_counts.iter().map(|&x| u64::from(x)).sum();
        if sum != u64::from(block.len) {
            return Err(Error::CountMismatch {
                expected: u64::from(block.len),
                got: sum,
            });
        }
        self.remove_block(b);
        write_composition(&mut self.labels[block.range()], new_counts);
        self.insert_block(b);
        Ok(())
    }

    /// Subtracts block `b`'s tokens from the aggregates, leaving its labels
    /// in place. The aggregates then hold the block's residual counts.
    pub(crate) fn remove_block(&mut self, b: usize) {
        let block = self.blocks[b];
        let k = self.num_topics;
        let (d, v) = (block.doc as usize * k, block.word as usize * k);
        for &t in &self.labels[block.range()] {
            let t = t as usize;
            self.doc_topic[d + t] -= 1;
            self.word_topic[v + t] -= 1;
            self.topic_total[t] -= 1;
        }
    }

    pub(crate) fn insert_block(&mut self, b: usize) {
        let block = self.blocks[b];
        let k = self.num_topics;
        let (d, v) = (block.doc as usize * k, block.word as usize * k);
        for &t in &self.labels[block.range()] {
            let t = t as usize;
            self.doc_topic[d + t] += 1;
            self.word_topic[v + t] += 1;
            self.topic_total[t] += 1;
        }
    }

    /// Split borrow used by the sweeps: residual views plus the block's labels.
    pub(crate) fn block_parts_mut(&mut self, b: usize) -> BlockParts<'_> {
        let block = self.blocks[b];
        let k = self.num_topics;
        let (d, v) = (block.doc as usize * k, block.word as usize * k);
        BlockParts {
            doc: &mut self.doc_topic[d..d + k],
            word: &mut self.word_topic[v..v + k],
            total: &mut self.topic_total,
            labels: &mut self.labels[block.range()],
        }
    }

    /// Unnormalized collapsed log posterior
    /// `sum_dk lnG(S_d.k + a_k) + sum_kv lnG(S_.vk + b) - sum_k lnG(S_..k + V b)`.
    pub fn log_unnormalized_posterior(&self, hp: &Hyperparams) -> f64 {
        let k = self.num_topics;
        let mut doc_part = 0.0;
        for row in self.doc_topic.chunks_exact(k) {
            for (t, &n) in row.iter().enumerate() {
                doc_part += ln_gamma(f64::from(n) + hp.alpha[t]);
            }
        }
        let mut word_part = 0.0;
        for &n in &self.word_topic {
            word_part += ln_gamma(f64::from(n) + hp.beta);
        }
        let total_part: f64 = self
            .topic_total
            .iter()
            .map(|&n| ln_gamma(f64::from(n) + hp.vocab_beta))
            .sum();
        doc_part + word_part - total_part
    }

    /// Lists every violated state invariant; empty means consistent.
    pub fn validate(&self) -> Vec<String> {
        let k = self.num_topics;
        let mut report = Vec::new();
        let mut doc_topic = vec![0u32; self.doc_topic.len()];
        let mut word_topic = vec![0u32; self.word_topic.len()];
        let mut topic_total = vec![0u32; k];
        for (b, block) in self.blocks.iter().enumerate() {
            for &t in &self.labels[block.range()] {
                let t = t as usize;
                if t >= k {
                    report.push(format!("block {} holds topic {} >= K", b, t));
                    continue;
                }
                doc_topic[block.doc as usize * k + t] += 1;
                word_topic[block.word as usize * k + t] += 1;
                topic_total[t] += 1;
            }
        }
        for (i, (&got, &want)) in self.doc_topic.iter().zip(&doc_topic).enumerate() {
            if got != want {
                report.push(format!("doc_topic[{}][{}] = {}, blocks give {}", i / k, i % k, got, want));
            }
        }
        for (i, (&got, &want)) in self.word_topic.iter().zip(&word_topic).enumerate() {
            if got != want {
                report.push(format!("word_topic[{}][{}] = {}, blocks give {}", i / k, i % k, got, want));
            }
        }
        for (t, (&got, &want)) in self.topic_total.iter().zip(&topic_total).enumerate() {
            if got != want {
                report.push(format!("topic_total[{}] = {}, blocks give {}", t, got, want));
            }
        }
        let total: u64 = self.topic_total.iter().map(|&x| u64::from(x)).sum();
        if total != self.labels.len() as u64 {
            report.push(format!("topic totals sum to {}, corpus has {} tokens", total, self.labels.len()));
        }
        report
    }
}

pub(crate) struct BlockParts<'a> {
    pub doc: &'a mut [u32],
    pub word: &'a mut [u32],
    pub total: &'a mut [u32],
    pub labels: &'a mut [u32],
}

fn check_vocab(corpus: &Corpus, hp: &Hyperparams) -> Result<()> {
    if corpus.vocab_size() != hp.vocab_size() {
        return Err(Error::config(format!(
            "hyperparameters built for V = {}, corpus has V = {}",
            hp.vocab_size(),
            corpus.vocab_size()
        )));
    }
    Ok(())
}

/// Writes a composition as an ascending label multiset.
pub(crate) fn write_composition(labels: &mut [u32], counts: &[u32]) {
    let mut i = 0;
    for (t, &n) in counts.iter().enumerate() {
        for slot in &mut labels[i..i + n as usize] {
            *slot = t as u32;
        }
        i += n as usize;
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Change in the unnormalized log posterior when one block moves from
/// `old` to `new` with residual counts `ctx`.
pub fn log_posterior_delta(ctx: &BlockContext, old: &[u32], new: &[u32], hp: &Hyperparams) -> f64 {
    let mut delta = 0.0;
    for t in 0..ctx.num_topics() {
        if old[t] == new[t] {
            continue;
        }
        let a = f64::from(ctx.residual_doc[t]) + hp.alpha[t];
        let b = f64::from(ctx.residual_word[t]) + hp.beta;
        let c = f64::from(ctx.residual_total[t]) + hp.vocab_beta;
        let (o, n) = (f64::from(old[t]), f64::from(new[t]));
        delta += ln_gamma(a + n) - ln_gamma(a + o) + ln_gamma(b + n) - ln_gamma(b + o) - ln_gamma(c + n)
            + ln_gamma(c + o);
    }
    delta
}

/// Header of a state checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub num_docs: usize,
    pub vocab_size: usize,
    pub num_topics: usize,
    pub seed: u64,
    pub iteration: usize,
}

/// Writes `D V K seed iteration`, then one `d v n_1 ... n_K` line per block
/// (1-based ids).
pub fn write_checkpoint<W: Write>(state: &BlockState, seed: u64, iteration: usize, mut sink: W) -> Result<()> {
    writeln!(
        sink,
        "{} {} {} {} {}",
        state.num_docs, state.vocab_size, state.num_topics, seed, iteration
    )?;
    let mut line = String::new();
    for b in 0..state.blocks.len() {
        let block = state.blocks[b];
        line.clear();
        line.push_str(&format!("{} {}", block.doc + 1, block.word + 1));
        for n in state.block_counts(b) {
            line.push(' ');
            line.push_str(&n.to_string());
        }
        line.push('\n');
        sink.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Loads a checkpoint written for `corpus`; aggregates are recomputed and
/// validated.
pub fn read_checkpoint<R: BufRead>(reader: R, corpus: &Corpus) -> Result<(BlockState, CheckpointHeader)> {
    let mut lines = reader.lines().enumerate();
    let (_, head) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty checkpoint"))?;
    let head = head?;
    let fields: Vec<&str> = head.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(Error::parse(1, "checkpoint header needs D V K seed iteration"));
    }
    let num = |i: usize| -> Result<u64> {
        fields[i]
            .parse::<u64>()
            .map_err(|_| Error::parse(1, format!("malformed header field {:?}", fields[i])))
    };
    let header = CheckpointHeader {
        num_docs: num(0)? as usize,
        vocab_size: num(1)? as usize,
        num_topics: num(2)? as usize,
        seed: num(3)?,
        iteration: num(4)? as usize,
    };
    if header.num_docs != corpus.num_docs() || header.vocab_size != corpus.vocab_size() {
        return Err(Error::parse(1, "checkpoint dimensions do not match corpus"));
    }
    let mut counts = vec![Vec::new(); corpus.num_entries()];
    let mut filled = vec![false; corpus.num_entries()];
    let skeleton = BlockState::skeleton(corpus, header.num_topics)?;
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|f| f.parse::<u64>().map_err(|_| Error::parse(lineno, format!("malformed value {:?}", f))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != header.num_topics + 2 || vals[0] == 0 || vals[1] == 0 {
            return Err(Error::parse(lineno, "block record needs d v n_1 .. n_K"));
        }
        let b = skeleton
            .block_index(vals[0] as usize - 1, vals[1] as usize - 1)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        if filled[b] {
            return Err(Error::parse(lineno, "duplicate block record"));
        }
        filled[b] = true;
        counts[b] = vals[2..].iter().map(|&x| x as u32).collect();
    }
    if let Some(b) = filled.iter().position(|f| !f) {
        let block = skeleton.blocks[b];
        return Err(Error::Invariant(format!(
            "checkpoint misses block ({}, {})",
            block.doc + 1,
            block.word + 1
        )));
    }
    let state = BlockState::from_block_counts(corpus, header.num_topics, &counts)?;
    let report = state.validate();
    if !report.is_empty() {
        return Err(Error::Invariant(report.join("; ")));
    }
    Ok((state, header))
}
