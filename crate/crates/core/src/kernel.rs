//! Exact sampling of one block's topic composition.
//!
//! For a block of `C` tokens with residual counts frozen, the composition
//! `(n_1, ..., n_K)` has unnormalized mass `prod_k q_k(n_k)` where
//!
//! ```text
//! q_k(n) = (r_dk + a_k)^(n) (r_vk + b)^(n) / (n! (r_k + V b)^(n))
//! ```
//!
//! and `x^(n)` is the rising factorial. The normalizing constants
//! `h_{k0:k1}(c)` are discrete convolutions of the `q_k` rows, accumulated
//! either along topic prefixes (for backward simulation) or up a binary
//! partition of the topics (for nested simulation).
//!
//! # Scaling
//!
//! Weights are stored as `q~_k(n) = q_k(n) * exp(-n * log_rate)`. The factor
//! depends only on `n`, so every composition of `C` tokens is multiplied by
//! the same `exp(-C * log_rate)`: the distribution is unchanged while values
//! stay in floating-point range. Every constant derived from the table
//! carries the same rate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{BlockContext, Hyperparams};

/// Block sizes above this use the logarithmic weight path directly.
const DIRECT_PATH_MAX_SIZE: usize = 64;
/// Accepted magnitude of a scaled normalizer before rescaling kicks in.
const SAFE_LOW: f64 = 1e-200;
const SAFE_HIGH: f64 = 1e200;

/// Work performed by a sampler, accumulated across blocks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    /// Multiply-adds spent evaluating weights and normalizing constants.
    pub density_ops: u64,
    /// Nonzero stages visited while drawing (backward topics, nested nodes).
    pub sampling_stages: u64,
    /// Categorical draws performed.
    pub categorical_draws: u64,
}

impl OpCounter {
    pub fn add(&mut self, other: &OpCounter) {
        self.density_ops += other.density_ops;
        self.sampling_stages += other.sampling_stages;
        self.categorical_draws += other.categorical_draws;
    }
}

/// Density operations of one blocked update of a size-`c` block over `k`
/// topics: `c` recurrence steps per topic plus `k - 1` convolutions of
/// length `c + 1`. Forward and upward recursions cost the same.
pub fn blocked_density_ops(c: u64, k: u64) -> u64 {
    k * c + (k - 1) * (c + 1) * (c + 2) / 2
}

/// Per-topic weights `q_k(0..=C)` in scaled form.
#[derive(Debug, Clone, Default)]
pub struct WeightTable {
    num_topics: usize,
    size: usize,
    scaled: Vec<f64>,
    log_rate: f64,
    log_q: Vec<f64>,
}

impl WeightTable {
    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    /// Block size `C`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn log_rate(&self) -> f64 {
        self.log_rate
    }

    /// Scaled row `q~_k(0..=C)`.
    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.size + 1;
        &self.scaled[k * w..(k + 1) * w]
    }

    /// Unscaled `q_k(n)`.
    pub fn value(&self, k: usize, n: usize) -> f64 {
        self.row(k)[n] * (n as f64 * self.log_rate).exp()
    }

    /// Multiplies every weight by `factor^n`, a change of scale that leaves
    /// the block distribution untouched.
    pub fn rescale(&mut self, factor: f64) {
        assert!(factor > 0.0 && factor.is_finite());
        let w = self.size + 1;
        for row in self.scaled[..self.num_topics * w].chunks_exact_mut(w) {
            let mut f = 1.0;
            for x in row.iter_mut() {
                *x *= f;
                f *= factor;
            }
        }
        self.log_rate -= factor.ln();
    }

    /// Sizes the table; every entry is overwritten by the caller.
    fn reset(&mut self, num_topics: usize, size: usize) {
        self.num_topics = num_topics;
        self.size = size;
        grow(&mut self.scaled, num_topics * (size + 1));
    }

    /// Multiplicative recurrence in linear space, normalized so the largest
    /// single-token weight is one. Returns `false` if any value left the
    /// finite range.
    fn fill_direct(&mut self, res: &Residuals<'_>, size: usize, hp: &Hyperparams) -> bool {
        let k = res.doc.len();
        self.reset(k, size);
        let w = size + 1;
        let alpha = hp.alpha();
        let (beta, vbeta) = (hp.beta(), hp.vocab_beta());

        if size == 1 {
            // Single-token weights are used unscaled; the root check in the
            // sampler catches the rare out-of-range case.
            let mut ok = true;
            for (t, pair) in self.scaled[..2 * k].chunks_exact_mut(2).enumerate() {
                let a = f64::from(res.doc[t]) + alpha[t];
                let b = f64::from(res.word[t]) + beta;
                let c = f64::from(res.total[t]) + vbeta;
                let q1 = a * b / c;
                pair[0] = 1.0;
                pair[1] = q1;
                ok &= q1.is_finite();
            }
            self.log_rate = 0.0;
            return ok;
        }

        let mut max1 = 0.0f64;
        for t in 0..k {
            let a = f64::from(res.doc[t]) + alpha[t];
            let b = f64::from(res.word[t]) + beta;
            let c = f64::from(res.total[t]) + vbeta;
            let row = &mut self.scaled[t * w..(t + 1) * w];
            row[0] = 1.0;
            let mut q = 1.0;
            for n in 1..=size {
                let m = (n - 1) as f64;
                q *= (a + m) * (b + m) / (n as f64 * (c + m));
                row[n] = q;
            }
            max1 = max1.max(row[1]);
        }
        if !(max1.is_finite() && max1 > 0.0) {
            return false;
        }
        let inv = 1.0 / max1;
        let mut ok = true;
        for row in self.scaled[..k * w].chunks_exact_mut(w) {
            let mut f = inv;
            for x in &mut row[1..] {
                *x *= f;
                f *= inv;
                ok &= x.is_finite();
            }
        }
        self.log_rate = max1.ln();
        ok
    }

    /// Log-space weights. With `log_rate = None` the rate is chosen so that
    /// every scaled weight is at most one.
    fn fill_log(&mut self, res: &Residuals<'_>, size: usize, hp: &Hyperparams, log_rate: Option<f64>) {
        let k = res.doc.len();
        self.reset(k, size);
        let w = size + 1;
        grow(&mut self.log_q, k * w);
        let alpha = hp.alpha();
        let (beta, vbeta) = (hp.beta(), hp.vocab_beta());
        let mut best = f64::NEG_INFINITY;
        for t in 0..k {
            let a = f64::from(res.doc[t]) + alpha[t];
            let b = f64::from(res.word[t]) + beta;
            let c = f64::from(res.total[t]) + vbeta;
            let row = &mut self.log_q[t * w..(t + 1) * w];
            row[0] = 0.0;
            let mut lq = 0.0;
            for n in 1..=size {
                let m = (n - 1) as f64;
                lq += (a + m).ln() + (b + m).ln() - (n as f64).ln() - (c + m).ln();
                row[n] = lq;
                best = best.max(lq / n as f64);
            }
        }
        let fallback = if best.is_finite() { best } else { 0.0 };
        self.apply_log_rate(log_rate.unwrap_or(fallback));
    }

    fn apply_log_rate(&mut self, log_rate: f64) {
        let w = self.size + 1;
        self.log_rate = log_rate;
        let n = self.num_topics * w;
        for (i, (x, &lq)) in self.scaled[..n].iter_mut().zip(&self.log_q[..n]).enumerate() {
            *x = (lq - (i % w) as f64 * log_rate).exp();
        }
    }

    fn fill(&mut self, res: &Residuals<'_>, size: usize, hp: &Hyperparams, counter: &mut OpCounter) {
        counter.density_ops += (res.doc.len() * size) as u64;
        if size > DIRECT_PATH_MAX_SIZE || !self.fill_direct(res, size, hp) {
            self.fill_log(res, size, hp, None);
        }
    }

    /// Forces the log-space path and picks the rate so the scaled
    /// normalizer `h~_{1:K}(C)` is close to one.
    fn refit_to_normalizer(&mut self, res: &Residuals<'_>, hp: &Hyperparams) -> Result<()> {
        let size = self.size;
        self.fill_log(res, size, hp, None);
        let log_h = log_normalizer(&self.log_q, self.num_topics, size);
        if !log_h.is_finite() {
            return Err(Error::Numerical(format!(
                "block normalizer is not finite in log space (C = {})",
                size
            )));
        }
        self.apply_log_rate(log_h / size as f64);
        Ok(())
    }
}

/// Scratch buffers only ever grow; callers overwrite the prefix they use.
fn grow(buf: &mut Vec<f64>, len: usize) {
    if buf.len() < len {
        buf.resize(len, 0.0);
    }
}

/// Log of `h_{1:K}(C)` by log-sum-exp convolution; slow, used only when the
/// scaled recursion leaves the safe range.
fn log_normalizer(log_q: &[f64], k: usize, size: usize) -> f64 {
    let w = size + 1;
    let mut acc: Vec<f64> = log_q[..w].to_vec();
    let mut next = vec![0.0; w];
    for t in 1..k {
        let row = &log_q[t * w..(t + 1) * w];
        for c in 0..w {
            let terms = (0..=c).map(|n| row[n] + acc[c - n]);
            let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
            next[c] = m + terms.map(|x| (x - m).exp()).sum::<f64>().ln();
        }
        std::mem::swap(&mut acc, &mut next);
    }
    acc[size]
}

/// Residual count rows for one block.
pub(crate) struct Residuals<'a> {
    pub doc: &'a [u32],
    pub word: &'a [u32],
    pub total: &'a [u32],
}

impl<'a> From<&'a BlockContext> for Residuals<'a> {
    fn from(ctx: &'a BlockContext) -> Self {
        Residuals {
            doc: &ctx.residual_doc,
            word: &ctx.residual_word,
            total: &ctx.residual_total,
        }
    }
}

/// Evaluates `q_k(n)` for `n = 0..=C` from a block context.
pub fn compute_weights(ctx: &BlockContext, hp: &Hyperparams, counter: &mut OpCounter) -> WeightTable {
    let mut table = WeightTable::default();
    table.fill(&ctx.into(), ctx.block_size as usize, hp, counter);
    table
}

/// Convolution `out[c] = sum_{n<=c} left[n] * right[c - n]`, summed in
/// ascending `n` so that stage draws can replay the same partial sums.
///
/// Scaled weights and constants always have `x[0] == 1`, so the end terms
/// are taken without multiplying; the result is bit-identical.
fn convolve(left: &[f64], right: &[f64], out: &mut [f64]) {
    debug_assert!(left[0] == 1.0 && right[0] == 1.0);
    let w = out.len();
    let (left, right) = (&left[..w], &right[..w]);
    out[0] = 1.0;
    for c in 1..w {
        let mut s = right[c];
        for n in 1..c {
            s += left[n] * right[c - n];
        }
        out[c] = s + left[c];
    }
}

fn conv_ops(size: usize) -> u64 {
    ((size + 1) * (size + 2) / 2) as u64
}

fn check_normalizer(h: f64, what: &str) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{} normalizer is {}", what, h)))
    }
}

fn in_safe_range(h: f64) -> bool {
    h.is_finite() && (SAFE_LOW..=SAFE_HIGH).contains(&h)
}

/// Prefix constants `h_{1:k}(c)` for `k = 1..=K`, `c = 0..=C`.
#[derive(Debug, Clone, Default)]
pub struct PrefixConstants {
    num_topics: usize,
    size: usize,
    scaled: Vec<f64>,
    log_rate: f64,
}

impl PrefixConstants {
    /// Scaled row `h~_{1:k+1}(0..=C)` (0-based `k`).
    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.size + 1;
        &self.scaled[k * w..(k + 1) * w]
    }

    /// Unscaled `h_{1:k+1}(c)`.
    pub fn value(&self, k: usize, c: usize) -> f64 {
        self.row(k)[c] * (c as f64 * self.log_rate).exp()
    }

    /// `ln h_{1:K}(C)`.
    pub fn log_normalizer(&self) -> f64 {
        self.row(self.num_topics - 1)[self.size].ln() + self.size as f64 * self.log_rate
    }

    fn root(&self) -> f64 {
        self.row(self.num_topics - 1)[self.size]
    }

    fn fill(&mut self, q: &WeightTable, counter: &mut OpCounter) {
        let (k, size) = (q.num_topics, q.size);
        let w = size + 1;
        self.num_topics = k;
        self.size = size;
        self.log_rate = q.log_rate;
        grow(&mut self.scaled, k * w);
        if w == 2 {
            // Same sums as `convolve` with unit heads.
            let mut acc = q.scaled[1];
            self.scaled[0] = 1.0;
            self.scaled[1] = acc;
            for t in 1..k {
                acc += q.scaled[2 * t + 1];
                self.scaled[2 * t] = 1.0;
                self.scaled[2 * t + 1] = acc;
            }
        } else {
            self.scaled[..w].copy_from_slice(q.row(0));
            for t in 1..k {
                let (done, rest) = self.scaled.split_at_mut(t * w);
                convolve(q.row(t), &done[(t - 1) * w..], &mut rest[..w]);
            }
        }
        counter.density_ops += (k as u64 - 1) * conv_ops(size);
    }
}

/// Forward recursion `h_{1:k}(c) = sum_n q_k(n) h_{1:k-1}(c - n)`.
pub fn forward_constants(q: &WeightTable, counter: &mut OpCounter) -> Result<PrefixConstants> {
    let mut h = PrefixConstants::default();
    h.fill(q, counter);
    check_normalizer(h.root(), "prefix")?;
    Ok(h)
}

/// Inverse-CDF draw over `n = 0..=rem` with weights `a[n] * b[rem - n]`,
/// whose total is `total` (accumulated in the same order).
fn draw_split<R: Rng + ?Sized>(a: &[f64], b: &[f64], rem: usize, total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for n in 0..=rem {
        let w = a[n] * b[rem - n];
        acc += w;
        if w > 0.0 {
            if u < acc {
                return n;
            }
            last = n;
        }
    }
    last
}

/// Writes the drawn composition into `labels` (length `C`) as an ascending
/// label multiset.
fn backward_into<R: Rng + ?Sized>(
    q: &WeightTable,
    h: &PrefixConstants,
    rng: &mut R,
    counter: &mut OpCounter,
    labels: &mut [u32],
) {
    let mut rem = q.size;
    for t in (1..q.num_topics).rev() {
        if rem == 0 {
            break;
        }
        let n = draw_split(q.row(t), h.row(t - 1), rem, h.row(t)[rem], rng);
        labels[rem - n..rem].fill(t as u32);
        rem -= n;
        counter.sampling_stages += 1;
        counter.categorical_draws += 1;
    }
    labels[..rem].fill(0);
}

fn labels_to_counts(labels: &[u32], num_topics: usize) -> Vec<u32> {
    let mut counts = vec![0u32; num_topics];
    for &t in labels {
        counts[t as usize] += 1;
    }
    counts
}

/// Backward simulation: draws `n_K`, then `n_{K-1}`, ... given the topics
/// already placed; the last stage splits the remainder between topics 1
/// and 2 jointly. Stops as soon as no tokens remain.
pub fn backward_sample<R: Rng + ?Sized>(
    q: &WeightTable,
    h: &PrefixConstants,
    rng: &mut R,
    counter: &mut OpCounter,
) -> Result<Vec<u32>> {
    check_normalizer(h.root(), "prefix")?;
    let mut labels = vec![0u32; q.size];
    backward_into(q, h, rng, counter, &mut labels);
    Ok(labels_to_counts(&labels, q.num_topics))
}

/// Probability that [`backward_sample`] returns `counts`: the product of the
/// stage probabilities along its path.
pub fn backward_composition_prob(q: &WeightTable, h: &PrefixConstants, counts: &[u32]) -> f64 {
    let mut rem = q.size;
    let mut p = 1.0;
    for t in (1..q.num_topics).rev() {
        if rem == 0 {
            break;
        }
        let n = counts[t] as usize;
        if n > rem {
            return 0.0;
        }
        p *= q.row(t)[n] * h.row(t - 1)[rem - n] / h.row(t)[rem];
        rem -= n;
    }
    if counts[0] as usize == rem {
        p
    } else {
        0.0
    }
}

/// Node of the topic partition tree; topics are the 0-based range `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeNode {
    pub lo: usize,
    pub hi: usize,
    pub children: Option<(usize, usize)>,
}

/// Binary partition of topics `0..K`. Node `[lo, hi]` splits at
/// `mid = (lo + hi) / 2` into `[lo, mid]` and `[mid + 1, hi]`. Nodes are in
/// preorder, so children always follow their parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicTree {
    nodes: Vec<TreeNode>,
    num_topics: usize,
    /// `[node, left, right]` for internal nodes, children before parents.
    merges: Vec<[u32; 3]>,
    /// Node index of each topic's leaf.
    leaf_of: Vec<u32>,
}

impl TopicTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn depth(&self) -> usize {
        fn go(tree: &TopicTree, i: usize) -> usize {
            match tree.nodes[i].children {
                None => 0,
                Some((l, r)) => 1 + go(tree, l).max(go(tree, r)),
            }
        }
        go(self, 0)
    }
}

pub fn build_topic_tree(num_topics: usize) -> Result<TopicTree> {
    if num_topics == 0 {
        return Err(Error::config("topic tree needs K >= 1"));
    }
    fn grow(nodes: &mut Vec<TreeNode>, lo: usize, hi: usize) -> usize {
        let idx = nodes.len();
        nodes.push(TreeNode { lo, hi, children: None });
        if lo < hi {
            let mid = (lo + hi) / 2;
            let left = grow(nodes, lo, mid);
            let right = grow(nodes, mid + 1, hi);
            nodes[idx].children = Some((left, right));
        }
        idx
    }
    let mut nodes = Vec::with_capacity(2 * num_topics - 1);
    grow(&mut nodes, 0, num_topics - 1);
    let mut merges = Vec::with_capacity(num_topics - 1);
    let mut leaf_of = vec![0u32; num_topics];
    for (i, node) in nodes.iter().enumerate().rev() {
        match node.children {
            Some((l, r)) => merges.push([i as u32, l as u32, r as u32]),
            None => leaf_of[node.lo] = i as u32,
        }
    }
    Ok(TopicTree {
        nodes,
        num_topics,
        merges,
        leaf_of,
    })
}

/// Constants `h_{lo:hi}(0..=C)` for every node of a [`TopicTree`].
#[derive(Debug, Clone, Default)]
pub struct TreeConstants {
    size: usize,
    scaled: Vec<f64>,
    log_rate: f64,
}

impl TreeConstants {
    /// Scaled constants of node `i`.
    pub fn node(&self, i: usize) -> &[f64] {
        let w = self.size + 1;
        &self.scaled[i * w..(i + 1) * w]
    }

    /// Unscaled `h(c)` of node `i`.
    pub fn value(&self, i: usize, c: usize) -> f64 {
        self.node(i)[c] * (c as f64 * self.log_rate).exp()
    }

    pub fn log_normalizer(&self) -> f64 {
        self.node(0)[self.size].ln() + self.size as f64 * self.log_rate
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn fill(&mut self, tree: &TopicTree, q: &WeightTable, counter: &mut OpCounter) {
        let size = q.size;
        let w = size + 1;
        self.size = size;
        self.log_rate = q.log_rate;
        grow(&mut self.scaled, tree.nodes.len() * w);
        if w == 2 {
            // Single-token blocks: every h(0) is one and h(1) is a plain sum,
            // accumulated exactly as `convolve` would.
            let h = &mut self.scaled;
            for (k, &leaf) in tree.leaf_of.iter().enumerate() {
                let i = 2 * leaf as usize;
                h[i] = 1.0;
                h[i + 1] = q.scaled[2 * k + 1];
            }
            for &[i, l, r] in &tree.merges {
                let (i, l, r) = (2 * i as usize, 2 * l as usize, 2 * r as usize);
                h[i] = 1.0;
                h[i + 1] = h[r + 1] + h[l + 1];
            }
        } else {
            for (k, &leaf) in tree.leaf_of.iter().enumerate() {
                let i = leaf as usize;
                self.scaled[i * w..(i + 1) * w].copy_from_slice(q.row(k));
            }
            for &[i, l, r] in &tree.merges {
                let (i, l, r) = (i as usize, l as usize, r as usize);
                // Children sit after the parent in preorder.
                let (head, tail) = self.scaled.split_at_mut(l * w);
                let left = &tail[..w];
                let right = &tail[(r - l) * w..(r - l + 1) * w];
                convolve(left, right, &mut head[i * w..(i + 1) * w]);
            }
        }
        counter.density_ops += tree.merges.len() as u64 * conv_ops(size);
    }
}

/// Upward recursion: leaves take `q_k`, internal nodes convolve their children.
pub fn upward_constants(tree: &TopicTree, q: &WeightTable, counter: &mut OpCounter) -> Result<TreeConstants> {
    if tree.num_topics != q.num_topics {
        return Err(Error::config("tree and weight table disagree on K"));
    }
    let mut consts = TreeConstants::default();
    consts.fill(tree, q, counter);
    check_normalizer(consts.node(0)[consts.size], "root")?;
    Ok(consts)
}

fn nested_into<R: Rng + ?Sized>(
    tree: &TopicTree,
    consts: &TreeConstants,
    rng: &mut R,
    counter: &mut OpCounter,
    stack: &mut Vec<(usize, usize)>,
    labels: &mut [u32],
) {
    stack.clear();
    if consts.size > 0 {
        stack.push((0, consts.size));
    }
    // Left subtrees are popped first, so leaves arrive in ascending topic order.
    let mut pos = 0;
    while let Some((i, c)) = stack.pop() {
        counter.sampling_stages += 1;
        let node = tree.nodes[i];
        match node.children {
            None => {
                labels[pos..pos + c].fill(node.lo as u32);
                pos += c;
            }
            Some((l, r)) => {
                let n = draw_split(consts.node(l), consts.node(r), c, consts.node(i)[c], rng);
                counter.categorical_draws += 1;
                if c - n > 0 {
                    stack.push((r, c - n));
                }
                if n > 0 {
                    stack.push((l, n));
                }
            }
        }
    }
}

/// Nested simulation: splits each nonzero node's size between its children,
/// skipping empty subtrees; leaf sizes are the block's topic counts.
pub fn nested_sample<R: Rng + ?Sized>(
    tree: &TopicTree,
    consts: &TreeConstants,
    rng: &mut R,
    counter: &mut OpCounter,
) -> Result<Vec<u32>> {
    check_normalizer(consts.node(0)[consts.size], "root")?;
    let mut labels = vec![0u32; consts.size];
    nested_into(tree, consts, rng, counter, &mut Vec::new(), &mut labels);
    Ok(labels_to_counts(&labels, tree.num_topics))
}

/// Probability that [`nested_sample`] returns `counts`.
pub fn nested_composition_prob(tree: &TopicTree, consts: &TreeConstants, counts: &[u32]) -> f64 {
    let node_size = |node: &TreeNode| -> usize { counts[node.lo..=node.hi].iter().map(|&x| x as usize).sum() };
    if node_size(tree.root()) != consts.size {
        return 0.0;
    }
    let mut p = 1.0;
    for (i, node) in tree.nodes.iter().enumerate() {
        let c = node_size(node);
        if let (Some((l, r)), true) = (node.children, c > 0) {
            let n = node_size(&tree.nodes[l]);
            p *= consts.node(l)[n] * consts.node(r)[c - n] / consts.node(i)[c];
        }
    }
    p
}

/// Which exact procedure draws a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKernel {
    Backward,
    Nested,
}

/// Reusable scratch for drawing block compositions in a sweep.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    kernel: BlockKernel,
    tree: TopicTree,
    weights: WeightTable,
    prefix: PrefixConstants,
    tree_consts: TreeConstants,
    stack: Vec<(usize, usize)>,
}

impl BlockSampler {
    pub fn new(kernel: BlockKernel, num_topics: usize) -> Result<Self> {
        Ok(BlockSampler {
            kernel,
            tree: build_topic_tree(num_topics)?,
            weights: WeightTable::default(),
            prefix: PrefixConstants::default(),
            tree_consts: TreeConstants::default(),
            stack: Vec::new(),
        })
    }

    pub fn kernel(&self) -> BlockKernel {
        self.kernel
    }

    fn constants(&mut self, counter: &mut OpCounter) -> f64 {
        match self.kernel {
            BlockKernel::Backward => {
                self.prefix.fill(&self.weights, counter);
                self.prefix.root()
            }
            BlockKernel::Nested => {
                self.tree_consts.fill(&self.tree, &self.weights, counter);
                self.tree_consts.node(0)[self.weights.size]
            }
        }
    }

    /// Draws a composition of `labels.len()` tokens given residual rows and
    /// writes it into `labels` as an ascending multiset.
    pub(crate) fn draw<R: Rng + ?Sized>(
        &mut self,
        res: &Residuals<'_>,
        hp: &Hyperparams,
        rng: &mut R,
        counter: &mut OpCounter,
        labels: &mut [u32],
    ) -> Result<()> {
        let size = labels.len();
        self.weights.fill(res, size, hp, counter);
        let mut root = self.constants(counter);
        if !in_safe_range(root) {
            self.weights.refit_to_normalizer(res, hp)?;
            root = self.constants(counter);
            check_normalizer(root, "block")?;
        }
        match self.kernel {
            BlockKernel::Backward => backward_into(&self.weights, &self.prefix, rng, counter, labels),
            BlockKernel::Nested => nested_into(&self.tree, &self.tree_consts, rng, counter, &mut self.stack, labels),
        }
        Ok(())
    }

    /// Draws a composition for a context.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        ctx: &BlockContext,
        hp: &Hyperparams,
        rng: &mut R,
        counter: &mut OpCounter,
    ) -> Result<Vec<u32>> {
        let mut labels = vec![0u32; ctx.block_size as usize];
        self.draw(&ctx.into(), hp, rng, counter, &mut labels)?;
        Ok(labels_to_counts(&labels, ctx.num_topics()))
    }

    /// Exact probability that [`BlockSampler::sample`] returns `counts` for
    /// `ctx`, computed from the kernel's own stage probabilities.
    pub fn transition_prob(&mut self, ctx: &BlockContext, hp: &Hyperparams, counts: &[u32]) -> Result<f64> {
        let mut counter = OpCounter::default();
        let res: Residuals<'_> = ctx.into();
        self.weights.fill(&res, ctx.block_size as usize, hp, &mut counter);
        if !in_safe_range(self.constants(&mut counter)) {
            self.weights.refit_to_normalizer(&res, hp)?;
            self.constants(&mut counter);
        }
        Ok(match self.kernel {
            BlockKernel::Backward => backward_composition_prob(&self.weights, &self.prefix, counts),
            BlockKernel::Nested => nested_composition_prob(&self.tree, &self.tree_consts, counts),
        })
    }
}
