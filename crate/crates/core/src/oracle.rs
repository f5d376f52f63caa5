//! Brute-force enumeration used to check the samplers on tiny problems.
//!
//! Everything here is exponential in problem size and guarded by hard limits.
//! Weights are recomputed from plain products of rising factorials and
//! `ln_gamma`, sharing no code with the kernel recursions.

use std::collections::HashMap;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{ln_gamma, BlockContext, BlockState, Hyperparams};

pub const MAX_BLOCK_SIZE: usize = 6;
pub const MAX_BLOCK_TOPICS: usize = 6;
pub const MAX_CONFIGURATIONS: u64 = 1_000_000;

/// A distribution over count vectors.
///
/// For a single block the support holds compositions of `C`; for a corpus it
/// holds full configurations, the block counts concatenated in entry order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPmf {
    pub support: Vec<Vec<u32>>,
    pub probabilities: Vec<f64>,
    /// Sum of the unnormalized weights, on the log scale.
    pub log_normalizer: f64,
}

impl ExactPmf {
    fn from_log_weights(support: Vec<Vec<u32>>, log_w: Vec<f64>) -> Self {
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = log_w.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = scaled.iter().sum();
        ExactPmf {
            support,
            probabilities: scaled.iter().map(|w| w / total).collect(),
            log_normalizer: max + total.ln(),
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn index_of(&self, point: &[u32]) -> Option<usize> {
        self.support.iter().position(|s| s.as_slice() == point)
    }

    pub fn probability(&self, point: &[u32]) -> f64 {
        self.index_of(point).map_or(0.0, |i| self.probabilities[i])
    }

    /// Normalizer on the raw scale; may under- or overflow for large blocks.
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    /// Total variation between this pmf and an empirical histogram.
    /// Points outside the support count fully toward the distance.
    pub fn tv_from_counts(&self, counts: &HashMap<Vec<u32>, u64>) -> f64 {
        let n: u64 = counts.values().sum();
        if n == 0 {
            return 1.0;
        }
        let mut empirical = vec![0.0; self.len()];
        let mut outside = 0.0;
        for (point, &c) in counts {
            let f = c as f64 / n as f64;
            match self.index_of(point) {
                Some(i) => empirical[i] = f,
                None => outside += f,
            }
        }
        total_variation(&self.probabilities, &empirical) + outside / 2.0
    }
}

/// `1/2 sum |p_i - q_i|`; the shorter slice is padded with zeros.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (at(p, i) - at(q, i)).abs()).sum::<f64>()
}

/// All compositions of `total` into `parts` nonnegative parts, first part
/// descending: for `(2, 2)` this yields `[2,0], [1,1], [0,2]`.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(rem: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(rem);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for n in (0..=rem).rev() {
            prefix.push(n);
            rec(rem - n, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn rising(x: f64, n: u32) -> f64 {
    (0..n).map(|i| x + f64::from(i)).product()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// The per-topic weight of putting `n` of the block's tokens on topic `k`.
pub fn block_weight(ctx: &BlockContext, hp: &Hyperparams, k: usize, n: u32) -> f64 {
    let a = f64::from(ctx.residual_doc[k]) + hp.alpha()[k];
    let b = f64::from(ctx.residual_word[k]) + hp.beta();
    let c = f64::from(ctx.residual_total[k]) + hp.vocab_beta();
    rising(a, n) * rising(b, n) / (factorial(n) * rising(c, n))
}

/// Exact conditional law of a block's topic counts given the rest of the
/// state.
pub fn enumerate_block_pmf(ctx: &BlockContext, hp: &Hyperparams) -> Result<ExactPmf> {
    let size = ctx.block_size as usize;
    let k = ctx.num_topics();
    if size > MAX_BLOCK_SIZE || k > MAX_BLOCK_TOPICS {
        return Err(Error::GuardExceeded(format!(
            "block enumeration needs C <= {} and K <= {}, got C = {}, K = {}",
            MAX_BLOCK_SIZE, MAX_BLOCK_TOPICS, size, k
        )));
    }
    if k != hp.num_topics() {
        return Err(Error::config("context and hyperparameters disagree on K"));
    }
    let support = compositions(ctx.block_size, k);
    let log_w = support
        .iter()
        .map(|comp| {
            comp.iter()
                .enumerate()
                .map(|(t, &n)| block_weight(ctx, hp, t, n).ln())
                .sum()
        })
        .collect();
    Ok(ExactPmf::from_log_weights(support, log_w))
}

/// Flattened block counts of `state`, in entry order; the support key used by
/// [`enumerate_full_posterior`].
pub fn configuration_key(state: &BlockState) -> Vec<u32> {
    (0..state.num_blocks()).flat_map(|b| state.block_counts(b)).collect()
}

fn count_configurations(corpus: &Corpus, k: usize) -> u64 {
    corpus.entries().iter().fold(1u64, |acc, e| {
        acc.saturating_mul(binomial(u64::from(e.count) + k as u64 - 1, k as u64 - 1))
    })
}

/// Log of the collapsed joint density of one labelling with these aggregates,
/// up to a constant.
fn log_joint(doc_topic: &[Vec<u32>], word_topic: &[Vec<u32>], totals: &[u32], hp: &Hyperparams) -> f64 {
    let mut s = 0.0;
    for row in doc_topic {
        let n_d: u32 = row.iter().sum();
        for (t, &n) in row.iter().enumerate() {
            s += ln_gamma(f64::from(n) + hp.alpha()[t]);
        }
        s -= ln_gamma(f64::from(n_d) + hp.alpha_sum());
    }
    for row in word_topic {
        for &n in row {
            s += ln_gamma(f64::from(n) + hp.beta());
        }
    }
    for &n in totals {
        s -= ln_gamma(f64::from(n) + hp.vocab_beta());
    }
    s
}

fn aggregates(corpus: &Corpus, k: usize, config: &[u32]) -> (Vec<Vec<u32>>, Vec<Vec<u32>>, Vec<u32>) {
    let mut doc = vec![vec![0u32; k]; corpus.num_docs()];
    let mut word = vec![vec![0u32; k]; corpus.vocab_size()];
    let mut total = vec![0u32; k];
    for (e, block) in corpus.entries().iter().zip(config.chunks(k)) {
        for (t, &n) in block.iter().enumerate() {
            doc[e.doc as usize][t] += n;
            word[e.word as usize][t] += n;
            total[t] += n;
        }
    }
    (doc, word, total)
}

/// Exact collapsed posterior over count configurations, each weighted by the
/// number of labellings that realise it.
pub fn enumerate_full_posterior(corpus: &Corpus, hp: &Hyperparams) -> Result<ExactPmf> {
    let k = hp.num_topics();
    let n_configs = count_configurations(corpus, k);
    if n_configs > MAX_CONFIGURATIONS {
        return Err(Error::GuardExceeded(format!(
            "{} count configurations exceed the limit of {}",
            n_configs, MAX_CONFIGURATIONS
        )));
    }
    if corpus.total_tokens() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let per_block: Vec<Vec<Vec<u32>>> = corpus.entries().iter().map(|e| compositions(e.count, k)).collect();
    let mut support = Vec::with_capacity(n_configs as usize);
    let mut log_w = Vec::with_capacity(n_configs as usize);
    let mut idx = vec![0usize; per_block.len()];
    loop {
        let config: Vec<u32> = idx.iter().zip(&per_block).flat_map(|(&i, c)| c[i].iter().copied()).collect();
        let (doc, word, total) = aggregates(corpus, k, &config);
        let mut lw = log_joint(&doc, &word, &total, hp);
        for (e, block) in corpus.entries().iter().zip(config.chunks(k)) {
            lw += ln_gamma(f64::from(e.count) + 1.0);
            lw -= block.iter().map(|&n| ln_gamma(f64::from(n) + 1.0)).sum::<f64>();
        }
        support.push(config);
        log_w.push(lw);

        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(ExactPmf::from_log_weights(support, log_w));
            }
            idx[pos] += 1;
            if idx[pos] < per_block[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// The same posterior reached by scoring all `K^N` token labellings one by one
/// and pooling those with equal counts. Support order follows
/// [`enumerate_full_posterior`].
pub fn enumerate_label_posterior(corpus: &Corpus, hp: &Hyperparams) -> Result<ExactPmf> {
    let k = hp.num_topics();
    let n = corpus.total_tokens();
    let labellings = (k as f64).powf(n as f64);
    if labellings > MAX_CONFIGURATIONS as f64 {
        return Err(Error::GuardExceeded(format!(
            "{} labellings exceed the limit of {}",
            labellings, MAX_CONFIGURATIONS
        )));
    }
    let reference = enumerate_full_posterior(corpus, hp)?;
    let owner: Vec<usize> = corpus
        .entries()
        .iter()
        .enumerate()
        .flat_map(|(b, e)| std::iter::repeat_n(b, e.count as usize))
        .collect();
    let mut pooled: HashMap<Vec<u32>, Vec<f64>> = HashMap::new();
    let mut labels = vec![0usize; owner.len()];
    loop {
        let mut config = vec![0u32; corpus.num_entries() * k];
        for (&b, &z) in owner.iter().zip(&labels) {
            config[b * k + z] += 1;
        }
        let (doc, word, total) = aggregates(corpus, k, &config);
        pooled.entry(config).or_default().push(log_joint(&doc, &word, &total, hp));

        let mut pos = 0;
        loop {
            if pos == labels.len() {
                let log_w = reference
                    .support
                    .iter()
                    .map(|s| {
                        let terms = &pooled[s];
                        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
                    })
                    .collect();
                return Ok(ExactPmf::from_log_weights(reference.support, log_w));
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_topic_tree, compute_weights, forward_constants, upward_constants, OpCounter};

    fn zero_ctx(k: usize, c: u32) -> BlockContext {
        BlockContext {
            residual_doc: vec![0; k],
            residual_word: vec![0; k],
            residual_total: vec![0; k],
            block_size: c,
        }
    }

    #[test]
    fn compositions_enumerate_all() {
        assert_eq!(compositions(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        for (c, k) in [(0u32, 3usize), (3, 1), (4, 3), (6, 6)] {
            let all = compositions(c, k);
            assert_eq!(all.len() as u64, binomial(u64::from(c) + k as u64 - 1, k as u64 - 1));
            assert!(all.iter().all(|v| v.iter().sum::<u32>() == c));
        }
    }

    #[test]
    fn single_token_symmetric() {
        let hp = Hyperparams::symmetric(2, 5, 0.1, 0.01).unwrap();
        let pmf = enumerate_block_pmf(&zero_ctx(2, 1), &hp).unwrap();
        assert_eq!(pmf.probabilities, vec![0.5, 0.5]);
    }

    #[test]
    fn two_token_worked_example() {
        let hp = Hyperparams::symmetric(2, 25, 0.1, 0.01).unwrap();
        let ctx = zero_ctx(2, 2);
        assert!((block_weight(&ctx, &hp, 0, 1) - 0.004).abs() < 1e-15);
        assert!((block_weight(&ctx, &hp, 0, 2) - 0.0017776).abs() < 1e-12);
        let pmf = enumerate_block_pmf(&ctx, &hp).unwrap();
        let expected_norm = 2.0 * 0.0017776 + 0.004 * 0.004;
        assert!((pmf.normalizer() / expected_norm - 1.0).abs() < 1e-12);
        assert!((pmf.probability(&[2, 0]) - 0.0017776 / 0.0035712).abs() < 1e-12);
        assert!((pmf.probability(&[0, 2]) - 0.49776).abs() < 1e-5);
        assert!((pmf.probability(&[1, 1]) - 0.00448).abs() < 1e-5);
        assert!((pmf.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_guard() {
        let hp = Hyperparams::symmetric(7, 5, 0.1, 0.01).unwrap();
        assert!(matches!(enumerate_block_pmf(&zero_ctx(7, 2), &hp), Err(Error::GuardExceeded(_))));
        let hp = Hyperparams::symmetric(2, 5, 0.1, 0.01).unwrap();
        assert!(matches!(enumerate_block_pmf(&zero_ctx(2, 7), &hp), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn normalizer_matches_kernel_recursions() {
        let hp = Hyperparams::new(vec![0.1, 1.0, 0.01, 0.5], 0.1, 12).unwrap();
        let ctx = BlockContext {
            residual_doc: vec![3, 0, 1, 7],
            residual_word: vec![0, 2, 5, 1],
            residual_total: vec![10, 40, 6, 22],
            block_size: 4,
        };
        let pmf = enumerate_block_pmf(&ctx, &hp).unwrap();
        let mut ops = OpCounter::default();
        let q = compute_weights(&ctx, &hp, &mut ops);
        let h = forward_constants(&q, &mut ops).unwrap();
        let tree = build_topic_tree(4).unwrap();
        let u = upward_constants(&tree, &q, &mut ops).unwrap();
        assert!((h.log_normalizer() - pmf.log_normalizer).abs() < 1e-10);
        assert!((u.log_normalizer() - pmf.log_normalizer).abs() < 1e-10);
    }

    #[test]
    fn one_token_posterior_uniform() {
        let c = Corpus::from_entries(1, 4, [(0, 2, 1)]).unwrap();
        let hp = Hyperparams::symmetric(3, 4, 0.1, 0.01).unwrap();
        let pmf = enumerate_full_posterior(&c, &hp).unwrap();
        assert_eq!(pmf.len(), 3);
        for p in &pmf.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn count_space_matches_label_space() {
        // D=1, V=1, C=2, K=2, unit hyperparameters: counts (2,0), (1,1), (0,2).
        let c = Corpus::from_entries(1, 1, [(0, 0, 2)]).unwrap();
        let hp = Hyperparams::symmetric(2, 1, 1.0, 1.0).unwrap();
        let counts = enumerate_full_posterior(&c, &hp).unwrap();
        let labels = enumerate_label_posterior(&c, &hp).unwrap();
        assert_eq!(counts.support, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        // Per labelling: G(3)G(1)/G(4) when both tokens share a topic, G(2)G(2)/G(4)
        // when they differ; word and total terms cancel. Two labellings are mixed.
        let pure = 2.0f64;
        let mixed = 2.0 * 1.0;
        let z = 2.0 * pure + mixed;
        for (got, want) in counts.probabilities.iter().zip([pure / z, mixed / z, pure / z]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(total_variation(&counts.probabilities, &labels.probabilities) < 1e-12);
    }

    #[test]
    fn count_space_matches_label_space_tiny_corpus() {
        let c = Corpus::from_entries(2, 3, [(0, 0, 2), (0, 1, 1), (1, 1, 1), (1, 2, 2)]).unwrap();
        let hp = Hyperparams::symmetric(2, 3, 0.1, 0.01).unwrap();
        let counts = enumerate_full_posterior(&c, &hp).unwrap();
        let labels = enumerate_label_posterior(&c, &hp).unwrap();
        assert_eq!(counts.len(), 36);
        assert!((counts.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in counts.probabilities.iter().zip(&labels.probabilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_guard() {
        let c = Corpus::from_entries(1, 6, (0..6).map(|v| (0, v, 6))).unwrap();
        let hp = Hyperparams::symmetric(6, 6, 0.1, 0.01).unwrap();
        assert!(matches!(enumerate_full_posterior(&c, &hp), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn tv_examples() {
        assert_eq!(total_variation(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert!((total_variation(&[0.6, 0.4], &[0.5, 0.5]) - 0.1).abs() < 1e-15);
        assert_eq!(total_variation(&[1.0], &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn tv_from_counts_handles_outside_support() {
        let pmf = ExactPmf::from_log_weights(vec![vec![1, 0], vec![0, 1]], vec![0.0, 0.0]);
        let mut h = HashMap::new();
        h.insert(vec![1, 0], 5);
        h.insert(vec![0, 1], 5);
        assert!(pmf.tv_from_counts(&h).abs() < 1e-15);
        h.insert(vec![2, 2], 10);
        assert!((pmf.tv_from_counts(&h) - 0.5).abs() < 1e-15);
    }
}
