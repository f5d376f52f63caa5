//! Mixing and predictive diagnostics: parameter estimates from counts,
//! windowed mixture averaging, held-out perplexity and the trace CSV.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{BlockState, Hyperparams};

/// Point estimates `theta_dk = (S_d.k + a_k) / (N_d + sum a)` and
/// `phi_kv = (S_.vk + b) / (S_..k + V b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstimate {
    pub num_topics: usize,
    pub vocab_size: usize,
    /// Row-major `D x K`.
    pub theta: Vec<f64>,
    /// Row-major `K x V`.
    pub phi: Vec<f64>,
}

impl ParamEstimate {
    pub fn theta_row(&self, doc: usize) -> &[f64] {
        &self.theta[doc * self.num_topics..(doc + 1) * self.num_topics]
    }

    pub fn phi_row(&self, topic: usize) -> &[f64] {
        &self.phi[topic * self.vocab_size..(topic + 1) * self.vocab_size]
    }

    /// `sum_k theta_dk phi_kv`.
    pub fn mixture(&self, doc: usize, word: usize) -> f64 {
        let theta = self.theta_row(doc);
        (0..self.num_topics)
            .map(|k| theta[k] * self.phi[k * self.vocab_size + word])
            .sum()
    }
}

pub fn estimate_params(state: &BlockState, hp: &Hyperparams) -> ParamEstimate {
    let (d_count, k, v_count) = (state.num_docs(), state.num_topics(), state.vocab_size());
    let mut theta = vec![0.0; d_count * k];
    for d in 0..d_count {
        let row = state.doc_topic(d);
        let n_d: u64 = row.iter().map(|&x| u64::from(x)).sum();
        let denom = n_d as f64 + hp.alpha_sum();
        for t in 0..k {
            theta[d * k + t] = (f64::from(row[t]) + hp.alpha()[t]) / denom;
        }
    }
    let mut phi = vec![0.0; k * v_count];
    for t in 0..k {
        let denom = f64::from(state.topic_total()[t]) + hp.vocab_beta();
        for v in 0..v_count {
            phi[t * v_count + v] = (f64::from(state.word_topic(v)[t]) + hp.beta()) / denom;
        }
    }
    ParamEstimate {
        num_topics: k,
        vocab_size: v_count,
        theta,
        phi,
    }
}

/// Running sums of `sum_k theta_dk phi_kv` over a window of `L` iterations,
/// one slot per held-out cell.
#[derive(Debug, Clone)]
pub struct MixtureAccumulator {
    window: usize,
    test: Corpus,
    sums: Vec<f64>,
    samples: usize,
}

impl MixtureAccumulator {
    pub fn new(test: &Corpus, window: usize) -> Self {
        MixtureAccumulator {
            window,
            test: test.clone(),
            sums: vec![0.0; test.num_entries()],
            samples: 0,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn samples_in_window(&self) -> usize {
        self.samples
    }

    pub fn is_full(&self) -> bool {
        self.samples == self.window
    }

    fn begin(&mut self) -> Result<()> {
        if self.samples >= self.window {
            return Err(Error::Invariant(format!("mixture window of {} samples already full", self.window)));
        }
        self.samples += 1;
        Ok(())
    }

    pub fn accumulate(&mut self, est: &ParamEstimate) -> Result<()> {
        self.begin()?;
        for (s, e) in self.sums.iter_mut().zip(self.test.entries()) {
            *s += est.mixture(e.doc as usize, e.word as usize);
        }
        Ok(())
    }

    /// Same as [`MixtureAccumulator::accumulate`] with the estimate of
    /// `state`, evaluated only at the held-out cells.
    pub fn accumulate_state(&mut self, state: &BlockState, hp: &Hyperparams) -> Result<()> {
        self.begin()?;
        let k = state.num_topics();
        let inv_total: Vec<f64> = state
            .topic_total()
            .iter()
            .map(|&n| 1.0 / (f64::from(n) + hp.vocab_beta()))
            .collect();
        let mut doc = usize::MAX;
        let mut theta = vec![0.0; k];
        for (s, e) in self.sums.iter_mut().zip(self.test.entries()) {
            if e.doc as usize != doc {
                doc = e.doc as usize;
                let row = state.doc_topic(doc);
                let n_d: u64 = row.iter().map(|&x| u64::from(x)).sum();
                let denom = n_d as f64 + hp.alpha_sum();
                for t in 0..k {
                    theta[t] = (f64::from(row[t]) + hp.alpha()[t]) / denom;
                }
            }
            let word = state.word_topic(e.word as usize);
            *s += (0..k)
                .map(|t| theta[t] * (f64::from(word[t]) + hp.beta()) * inv_total[t])
                .sum::<f64>();
        }
        Ok(())
    }

    /// Window means aligned with `test.entries()`.
    pub fn means(&self) -> Vec<f64> {
        let n = self.samples.max(1) as f64;
        self.sums.iter().map(|s| s / n).collect()
    }

    pub fn perplexity(&self) -> Result<f64> {
        perplexity_aligned(&self.test, &self.means())
    }

    pub fn reset(&mut self) {
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        self.samples = 0;
    }
}

/// `exp(-sum C*_dv ln(mean_dv) / sum N*_d)` with one mean per test cell,
/// in `test.entries()` order.
pub fn perplexity_aligned(test: &Corpus, means: &[f64]) -> Result<f64> {
    if means.len() != test.num_entries() {
        return Err(Error::config(format!(
            "{} mixture means for {} test cells",
            means.len(),
            test.num_entries()
        )));
    }
    let tokens = test.total_tokens();
    if tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut log_lik = 0.0;
    for (e, &m) in test.entries().iter().zip(means) {
        if !(m > 0.0 && m <= 1.0 + 1e-12) {
            return Err(Error::Numerical(format!(
                "mixture probability {} at doc {} word {}",
                m,
                e.doc + 1,
                e.word + 1
            )));
        }
        log_lik += f64::from(e.count) * m.ln();
    }
    Ok((-log_lik / tokens as f64).exp())
}

/// Held-out perplexity from mixture means keyed by 0-based `(doc, word)`.
pub fn perplexity(test: &Corpus, means: &HashMap<(usize, usize), f64>) -> Result<f64> {
    let aligned = test
        .entries()
        .iter()
        .map(|e| {
            means
                .get(&(e.doc as usize, e.word as usize))
                .copied()
                .ok_or_else(|| Error::config(format!("no mixture mean for doc {} word {}", e.doc + 1, e.word + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    perplexity_aligned(test, &aligned)
}

/// One row of a chain trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub log_posterior: f64,
    pub perplexity: Option<f64>,
    pub density_ops: u64,
    pub sampling_stages: u64,
    /// Seconds spent in this iteration's sweep.
    pub wall_time: f64,
}

pub const TRACE_HEADER: &str = "iteration,log_posterior,perplexity,density_ops,sampling_stages,wall_time";

/// `<run-id>.<chain>.trace.csv`
pub fn trace_file_name(run_id: &str, chain: usize) -> String {
    format!("{}.{}.trace.csv", run_id, chain)
}

pub fn format_trace_row(r: &TraceRecord) -> String {
    let perplexity = r.perplexity.map(|p| p.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{}",
        r.iteration, r.log_posterior, perplexity, r.density_ops, r.sampling_stages, r.wall_time
    )
}

/// Writes the header line followed by one CSV row per record.
pub fn emit_trace<'a, I, W>(records: I, mut sink: W) -> Result<()>
where
    I: IntoIterator<Item = &'a TraceRecord>,
    W: Write,
{
    writeln!(sink, "{}", TRACE_HEADER)?;
    for r in records {
        writeln!(sink, "{}", format_trace_row(r))?;
    }
    sink.flush()?;
    Ok(())
}

pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim_end() == TRACE_HEADER => {}
        _ => return Err(Error::parse(1, "missing trace header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::parse(lineno, "expected 6 fields"));
        }
        let bad = |name: &str| Error::parse(lineno, format!("malformed {}", name));
        out.push(TraceRecord {
            iteration: f[0].parse().map_err(|_| bad("iteration"))?,
            log_posterior: f[1].parse().map_err(|_| bad("log_posterior"))?,
            perplexity: if f[2].is_empty() {
                None
            } else {
                Some(f[2].parse().map_err(|_| bad("perplexity"))?)
            },
            density_ops: f[3].parse().map_err(|_| bad("density_ops"))?,
            sampling_stages: f[4].parse().map_err(|_| bad("sampling_stages"))?,
            wall_time: f[5].parse().map_err(|_| bad("wall_time"))?,
        });
    }
    Ok(out)
}
