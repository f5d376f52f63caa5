//! Bag-of-words corpora: UCI `docword` ingestion, synthetic generation from
//! the LDA generative model, and document-completion splits.
//!
//! Document and word ids are 1-based in every text format and 0-based in
//! memory; the conversion happens only at the parse/write boundary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::samplers::sample_dirichlet;

/// One stored `(document, word)` cell with its occurrence count `C_dv >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Entry {
    pub doc: u32,
    pub word: u32,
    pub count: u32,
}

/// A document-by-word count table.
///
/// Entries are kept sorted by `(doc, word)`, so iteration order is the
/// canonical block order used by every sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    num_docs: usize,
    vocab_size: usize,
    entries: Vec<Entry>,
    doc_offsets: Vec<usize>,
    doc_lengths: Vec<u64>,
    vocab: Option<Vec<String>>,
}

impl Corpus {
    /// Builds a corpus from 0-based `(doc, word, count)` triples in any order.
    /// Duplicate cells and zero counts are rejected.
    pub fn from_entries<I>(num_docs: usize, vocab_size: usize, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u32)>,
    {
        let mut entries = Vec::new();
        for (doc, word, count) in cells {
            if doc >= num_docs {
                return Err(Error::config(format!(
                    "doc id {} out of range 0..{}",
                    doc, num_docs
                )));
            }
            if word >= vocab_size {
                return Err(Error::config(format!(
                    "word id {} out of range 0..{}",
                    word, vocab_size
                )));
            }
            if count == 0 {
                return Err(Error::config(format!(
                    "zero count stored for doc {} word {}",
                    doc, word
                )));
            }
            entries.push(Entry {
                doc: doc as u32,
                word: word as u32,
                count,
            });
        }
        entries.sort_unstable_by_key(|e| (e.doc, e.word));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].doc, w[0].word) == (w[1].doc, w[1].word))
        {
            return Err(Error::config(format!(
                "duplicate cell doc {} word {}",
                w[0].doc, w[0].word
            )));
        }
        Ok(Self::from_sorted(num_docs, vocab_size, entries))
    }

    fn from_sorted(num_docs: usize, vocab_size: usize, entries: Vec<Entry>) -> Self {
        let mut doc_offsets = vec![0usize; num_docs + 1];
        let mut doc_lengths = vec![0u64; num_docs];
        for e in &entries {
            doc_offsets[e.doc as usize + 1] += 1;
            doc_lengths[e.doc as usize] += u64::from(e.count);
        }
        for d in 0..num_docs {
            doc_offsets[d + 1] += doc_offsets[d];
        }
        Corpus {
            num_docs,
            vocab_size,
            entries,
            doc_offsets,
            doc_lengths,
            vocab: None,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Number of stored cells (blocks).
    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// The cells of document `doc`, sorted by word.
    pub fn doc_entries(&self, doc: usize) -> &[Entry] {
        &self.entries[self.doc_offsets[doc]..self.doc_offsets[doc + 1]]
    }

    pub fn doc_lengths(&self) -> &[u64] {
        &self.doc_lengths
    }

    pub fn doc_length(&self, doc: usize) -> u64 {
        self.doc_lengths[doc]
    }

    pub fn total_tokens(&self) -> u64 {
        self.doc_lengths.iter().sum()
    }

    /// `C_dv`, or 0 when the cell is not stored.
    pub fn count(&self, doc: usize, word: usize) -> u32 {
        let cells = self.doc_entries(doc);
        match cells.binary_search_by_key(&(word as u32), |e| e.word) {
            Ok(i) => cells[i].count,
            Err(_) => 0,
        }
    }

    pub fn max_count(&self) -> u32 {
        self.entries.iter().map(|e| e.count).max().unwrap_or(0)
    }

    /// Number of cells per block size, indexed by `C_dv` (index 0 unused).
    pub fn block_size_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.max_count() as usize + 1];
        for e in &self.entries {
            hist[e.count as usize] += 1;
        }
        hist
    }

    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    pub fn with_vocab(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.vocab_size {
            return Err(Error::config(format!(
                "vocabulary has {} words, corpus expects {}",
                labels.len(),
                self.vocab_size
            )));
        }
        self.vocab = Some(labels);
        Ok(self)
    }
}

fn parse_header_value(line: Option<(usize, String)>, what: &str) -> Result<usize> {
    let (lineno, text) = line.ok_or_else(|| Error::parse(0, format!("missing header {}", what)))?;
    text.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(lineno, format!("malformed header {}: {:?}", what, text.trim())))
}

/// Reads a UCI `docword` stream: three header lines `D`, `W`, `NNZ`, then
/// `NNZ` lines `docID wordID count`. The optional vocabulary stream holds one
/// word per line, line `i` naming word id `i`.
pub fn parse_uci_bow<R: BufRead, S: BufRead>(doc_stream: R, vocab_stream: Option<S>) -> Result<Corpus> {
    let mut lines = doc_stream
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)));
    let mut next_line = || -> Result<Option<(usize, String)>> { lines.next().transpose().map_err(Error::from) };

    let num_docs = parse_header_value(next_line()?, "D")?;
    let vocab_size = parse_header_value(next_line()?, "W")?;
    let nnz = parse_header_value(next_line()?, "NNZ")?;

    let mut entries = Vec::with_capacity(nnz);
    let mut seen = 0usize;
    while let Some((lineno, text)) = next_line()? {
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        seen += 1;
        if seen > nnz {
            return Err(Error::parse(
                lineno,
                format!("more than NNZ={} entries", nnz),
            ));
        }
        let mut fields = text.split_whitespace();
        let mut field = |name: &str| -> Result<u64> {
            let raw = fields
                .next()
                .ok_or_else(|| Error::parse(lineno, format!("missing {}", name)))?;
            raw.parse::<u64>()
                .map_err(|_| Error::parse(lineno, format!("malformed {}: {:?}", name, raw)))
        };
        let doc = field("docID")?;
        let word = field("wordID")?;
        let count = field("count")?;
        if fields.next().is_some() {
            return Err(Error::parse(lineno, "trailing fields"));
        }
        if doc < 1 || doc as usize > num_docs {
            return Err(Error::parse(lineno, format!("docID {} out of range 1..={}", doc, num_docs)));
        }
        if word < 1 || word as usize > vocab_size {
            return Err(Error::parse(
                lineno,
                format!("wordID {} out of range 1..={}", word, vocab_size),
            ));
        }
        if count < 1 || count > u64::from(u32::MAX) {
            return Err(Error::parse(lineno, format!("count {} out of range", count)));
        }
        entries.push((
            lineno,
            Entry {
                doc: (doc - 1) as u32,
                word: (word - 1) as u32,
                count: count as u32,
            },
        ));
    }
    if seen != nnz {
        return Err(Error::parse(
            3,
            format!("header declares NNZ={} but {} entries follow", nnz, seen),
        ));
    }

    entries.sort_by_key(|(_, e)| (e.doc, e.word));
    for w in entries.windows(2) {
        if (w[0].1.doc, w[0].1.word) == (w[1].1.doc, w[1].1.word) {
            let line = w[0].0.max(w[1].0);
            return Err(Error::parse(line, "duplicate (docID, wordID) entry"));
        }
    }
    let corpus = Corpus::from_sorted(num_docs, vocab_size, entries.into_iter().map(|(_, e)| e).collect());

    match vocab_stream {
        Some(stream) => {
            let labels = stream
                .lines()
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .map(|l| l.trim_end().to_string())
                .collect::<Vec<_>>();
            let labels = trim_trailing_blank(labels);
            corpus.with_vocab(labels)
        }
        None => Ok(corpus),
    }
}

fn trim_trailing_blank(mut labels: Vec<String>) -> Vec<String> {
    while labels.last().is_some_and(|l| l.is_empty()) {
        labels.pop();
    }
    labels
}

/// Serializes in UCI `docword` format, entries ascending by doc then word.
pub fn write_uci_bow(corpus: &Corpus) -> String {
    let mut out = String::with_capacity(16 * corpus.num_entries() + 32);
    let _ = write!(
        out,
        "{}\n{}\n{}\n",
        corpus.num_docs,
        corpus.vocab_size,
        corpus.entries.len()
    );
    for e in &corpus.entries {
        let _ = writeln!(out, "{} {} {}", e.doc + 1, e.word + 1, e.count);
    }
    out
}

pub fn write_uci_bow_to<W: Write>(corpus: &Corpus, mut sink: W) -> Result<()> {
    sink.write_all(write_uci_bow(corpus).as_bytes())?;
    Ok(())
}

pub fn write_vocab_to<W: Write>(labels: &[String], mut sink: W) -> Result<()> {
    for l in labels {
        writeln!(sink, "{}", l)?;
    }
    Ok(())
}

/// Parameters of a synthetic corpus drawn from the LDA generative model.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub vocab_size: usize,
    pub num_topics: usize,
    pub doc_length: usize,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
    /// Fixed topic-word distributions; drawn from `Dirichlet(beta)` when absent.
    pub true_phi: Option<Vec<Vec<f64>>>,
}

impl SynthConfig {
    pub fn symmetric(
        num_docs: usize,
        vocab_size: usize,
        num_topics: usize,
        doc_length: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> Self {
        SynthConfig {
            num_docs,
            vocab_size,
            num_topics,
            doc_length,
            alpha: vec![alpha; num_topics],
            beta,
            seed,
            true_phi: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_topics == 0 || self.vocab_size == 0 {
            return Err(Error::config("synthetic corpus needs K >= 1 and V >= 1"));
        }
        if self.alpha.len() != self.num_topics {
            return Err(Error::config(format!(
                "alpha has {} entries, K = {}",
                self.alpha.len(),
                self.num_topics
            )));
        }
        if self.alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::config("alpha entries must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta must be positive"));
        }
        if let Some(phi) = &self.true_phi {
            if phi.len() != self.num_topics {
                return Err(Error::config("true_phi must have K rows"));
            }
            for (k, row) in phi.iter().enumerate() {
                if row.len() != self.vocab_size || row.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::config(format!("true_phi row {} is not a distribution over V words", k)));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!("true_phi row {} sums to {}", k, s)));
                }
            }
        }
        Ok(())
    }
}

/// Inverse-CDF draw from a cumulative weight table.
fn draw_cumulative<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("non-empty table");
    let u = rng.random::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Draws a corpus from the LDA generative model. Returns the corpus with the
/// true document-topic (`D x K`) and topic-word (`K x V`) distributions.
#[allow(clippy::type_complexity)]
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Corpus, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phi = match &cfg.true_phi {
        Some(phi) => phi.clone(),
        None => {
            let conc = vec![cfg.beta; cfg.vocab_size];
            (0..cfg.num_topics)
                .map(|_| sample_dirichlet(&conc, &mut rng))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let phi_cdf: Vec<Vec<f64>> = phi.iter().map(|row| cumulative(row)).collect();

    let mut theta = Vec::with_capacity(cfg.num_docs);
    let mut cells = Vec::new();
    let mut counts = vec![0u32; cfg.vocab_size];
    for d in 0..cfg.num_docs {
        let theta_d = sample_dirichlet(&cfg.alpha, &mut rng)?;
        let theta_cdf = cumulative(&theta_d);
        for _ in 0..cfg.doc_length {
            let z = draw_cumulative(&theta_cdf, &mut rng);
            let w = draw_cumulative(&phi_cdf[z], &mut rng);
            counts[w] += 1;
        }
        for (v, c) in counts.iter_mut().enumerate() {
            if *c > 0 {
                cells.push((d, v, *c));
                *c = 0;
            }
        }
        theta.push(theta_d);
    }
    let corpus = Corpus::from_entries(cfg.num_docs, cfg.vocab_size, cells)?;
    Ok((corpus, theta, phi))
}

/// Document-completion holdout: the last `holdout_docs` documents each have
/// `round_half_even(holdout_fraction * N_d)` tokens moved to the test corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub holdout_docs: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(holdout_docs: usize, holdout_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            holdout_docs,
            holdout_fraction,
            seed,
        }
    }
}

/// Splits `corpus` into `(train, test)` for document completion.
///
/// Held-out tokens are chosen uniformly without replacement over the token
/// positions of each held-out document. Both halves keep the original `D` and
/// `V`, so document ids line up.
pub fn document_completion_split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    if spec.holdout_docs > corpus.num_docs {
        return Err(Error::config(format!(
            "holdout of {} documents exceeds D = {}",
            spec.holdout_docs, corpus.num_docs
        )));
    }
    if !(0.0..=1.0).contains(&spec.holdout_fraction) {
        return Err(Error::config("holdout fraction must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let first_test = corpus.num_docs - spec.holdout_docs;
    let mut train = Vec::with_capacity(corpus.num_entries());
    let mut test = Vec::new();

    for d in 0..corpus.num_docs {
        let cells = corpus.doc_entries(d);
        if d < first_test {
            train.extend_from_slice(cells);
            continue;
        }
        let n = corpus.doc_lengths[d] as usize;
        let m = (spec.holdout_fraction * n as f64).round_ties_even() as usize;
        let mut picked = index::sample(&mut rng, n, m.min(n)).into_vec();
        picked.sort_unstable();

        let mut held: BTreeMap<u32, u32> = BTreeMap::new();
        let mut cell = 0usize;
        let mut cell_end = cells.first().map_or(0, |e| e.count as usize);
        for pos in picked {
            while pos >= cell_end {
                cell += 1;
                cell_end += cells[cell].count as usize;
            }
            *held.entry(cells[cell].word).or_insert(0) += 1;
        }
        for e in cells {
            let h = held.get(&e.word).copied().unwrap_or(0);
            if h > 0 {
                test.push(Entry { count: h, ..*e });
            }
            if e.count > h {
                train.push(Entry {
                    count: e.count - h,
                    ..*e
                });
            }
        }
    }
    Ok((
        Corpus::from_sorted(corpus.num_docs, corpus.vocab_size, train),
        Corpus::from_sorted(corpus.num_docs, corpus.vocab_size, test),
    ))
}

/// Fraction of tokens whose word occurs exactly once in its document.
pub fn singleton_fraction(corpus: &Corpus) -> Result<f64> {
    let total = corpus.total_tokens();
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let singles = corpus.entries.iter().filter(|e| e.count == 1).count();
    Ok(singles as f64 / total as f64)
}
