//! Exact Markov chain Monte Carlo for latent Dirichlet allocation.
//!
//! The crate centres on the blocked collapsed Gibbs sampler: every occurrence
//! of word `v` in document `d` forms a block whose topic counts
//! `(n_dv1, ..., n_dvK)` are redrawn jointly from their exact full
//! conditional. Two exact draw procedures are provided:
//!
//! * **backward simulation** ([`kernel::backward_sample`]) walks topics from
//!   `K` down to `1` using prefix normalizing constants, and
//! * **nested simulation** ([`kernel::nested_sample`]) descends a binary
//!   partition of the topics, visiting at most `O(C log K)` nodes.
//!
//! Single-site collapsed Gibbs and the uncollapsed data-augmentation sampler
//! are included as baselines, together with the evaluation machinery needed
//! to compare them: the unnormalized collapsed log posterior, windowed
//! document-completion perplexity, operation counters and a timing harness.
//!
//! ```no_run
//! use blocklda::prelude::*;
//!
//! let cfg = SynthConfig::symmetric(200, 25, 10, 100, 0.1, 0.01, 7);
//! let (corpus, _, _) = generate_synthetic(&cfg).unwrap();
//! let hp = Hyperparams::symmetric(10, corpus.vocab_size(), 0.1, 0.01).unwrap();
//! let chain = ChainConfig::new(SamplerKind::BlockedNested, 100, 42);
//! let out = run_chain(&corpus, None, &hp, &chain, &mut NoopObserver).unwrap();
//! println!("final log posterior {}", out.trace.last().unwrap().log_posterior);
//! ```

pub mod bench;
pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod samplers;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::corpus::{
        document_completion_split, generate_synthetic, parse_uci_bow, singleton_fraction,
        write_uci_bow, Corpus, SplitSpec, SynthConfig,
    };
    pub use crate::diagnostics::{
        emit_trace, estimate_params, perplexity, MixtureAccumulator, ParamEstimate, TraceRecord,
    };
    pub use crate::kernel::{
        backward_sample, build_topic_tree, compute_weights, forward_constants, nested_sample,
        upward_constants, OpCounter, TopicTree,
    };
    pub use crate::model::{BlockContext, BlockState, Hyperparams};
    pub use crate::samplers::{
        run_chain, ChainConfig, ChainObserver, NoopObserver, SamplerKind, SweepOrder,
    };
    pub use crate::{Error, Result};
}
