//! Generation of labeled sentence-pair datasets by instructing a language
//! model, with counterlabel self-debiasing during decoding.
//!
//! The crate is `no_std` and needs only `alloc`. It contains:
//!
//! * [`lm`]: the [`LanguageModel`] interface plus two in-memory backends,
//!   [`TableLm`] (explicit distributions, used as a test substrate) and
//!   [`NgramLm`] (word n-grams trained on a corpus).
//! * [`instructions`]: prompt templates and counterlabel sets.
//! * [`sampler`]: self-debiasing, top-k / nucleus filtering and
//!   quote-terminated generation.
//! * [`pipeline`]: first-sentence pools, pair generation with try budgets and
//!   dataset post-processing.
//!
//! File formats, the remote backend, parallel execution and the CLI live in
//! the `dino` crate.
#![no_std]

extern crate alloc;

pub mod dist;
pub mod instructions;
pub mod lm;
pub mod ngram;
pub mod pipeline;
pub mod sampler;
pub mod table;
pub mod vocab;

pub use dist::{Distribution, DistributionError, TokenId};
pub use instructions::{
    counterlabels, InstructionConfig, InstructionError, InstructionSet, SimilarityLabel,
};
pub use lm::{LanguageModel, LmContext, LmError};
pub use ngram::{train_ngram, NgramError, NgramLm};
pub use pipeline::{GenerationJobSpec, GenerationMode, PairRecord, PipelineError, Provenance};
pub use sampler::{GenerationOutcome, SamplerConfig, Termination};
pub use table::{TableLm, TableSpec};
pub use vocab::{Tokenized, Vocabulary};
