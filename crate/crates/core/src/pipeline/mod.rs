//! Dataset construction: first-sentence pools, pair generation and
//! post-processing.
//!
//! Every random choice draws from a ChaCha8 generator seeded by
//! [`derive_seed`], so results depend only on the master seed and the
//! position of the job, never on scheduling.

mod postprocess;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::TokenId;
use crate::instructions::{check_sentence, InstructionError, InstructionSet, SimilarityLabel};
use crate::lm::{LanguageModel, LmContext, LmError};
use crate::sampler::{
    generate_continuation, generate_seed, reborrow, ConfigError, GenerationOutcome, SamplerConfig,
    SamplerError, Termination, TraceSink,
};

pub use postprocess::{
    compute_stats, postprocess, train_size, DatasetStats, PostprocessOptions, PostprocessOutput,
    PostprocessReport, ScoreCount, AUGMENTED_SCORE,
};

/// Random generator used for every job.
pub type JobRng = ChaCha8Rng;

/// Stream tags mixed into [`derive_seed`].
pub const POOL_STREAM: u64 = 1;
pub const CELL_STREAM: u64 = 2;
pub const POSTPROCESS_STREAM: u64 = 3;

/// Upper bound on seed-sentence attempts, as a multiple of the requested pool size.
pub const POOL_ATTEMPT_FACTOR: usize = 10;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one job: SplitMix64 folded over the master seed and each part,
/// `h = splitmix64(master)`, then `h = splitmix64(h ^ part)` per part.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &part| splitmix64(h ^ part))
}

fn label_code(label: SimilarityLabel) -> u64 {
    match label {
        SimilarityLabel::Different => 0,
        SimilarityLabel::Similar => 1,
        SimilarityLabel::Same => 2,
    }
}

pub fn pool_attempt_seed(master: u64, attempt: usize) -> u64 {
    derive_seed(master, &[POOL_STREAM, attempt as u64])
}

pub fn cell_attempt_seed(
    master: u64,
    x1_index: usize,
    label: SimilarityLabel,
    attempt: usize,
) -> u64 {
    derive_seed(
        master,
        &[
            CELL_STREAM,
            x1_index as u64,
            label_code(label),
            attempt as u64,
        ],
    )
}

pub fn postprocess_seed(master: u64) -> u64 {
    derive_seed(master, &[POSTPROCESS_STREAM])
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("pool size must be at least 1")]
    EmptyPoolRequest,
    #[error("no usable first sentences")]
    EmptyPool,
    #[error(transparent)]
    Instruction(#[from] InstructionError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Backend(#[from] LmError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid job settings: {0}")]
    InvalidSpec(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Augmented,
}

/// One labeled text pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub text_a: String,
    pub text_b: String,
    pub score: f64,
    /// Label of the instruction that produced the pair; `None` for augmented pairs.
    pub seed_label: Option<SimilarityLabel>,
    pub provenance: Provenance,
}

impl PairRecord {
    pub fn generated(x1: &str, x2: &str, label: SimilarityLabel) -> Self {
        PairRecord {
            text_a: x1.to_string(),
            text_b: x2.to_string(),
            score: label.value(),
            seed_label: Some(label),
            provenance: Provenance::Generated,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// First sentences come from a file.
    GivenX1,
    /// First sentences are generated with the seed prompt.
    FromScratch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationJobSpec {
    pub mode: GenerationMode,
    /// Number of first sentences to generate in from-scratch mode.
    pub x1_count: usize,
    pub pairs_per_label: usize,
    pub tries_per_pair: usize,
    /// Label whose instruction prefix prompts first-sentence generation.
    pub seed_label: SimilarityLabel,
    /// Drop exact duplicate first sentences.
    pub dedup_x1: bool,
}

impl Default for GenerationJobSpec {
    fn default() -> Self {
        GenerationJobSpec {
            mode: GenerationMode::FromScratch,
            x1_count: 15_000,
            pairs_per_label: 2,
            tries_per_pair: 5,
            seed_label: SimilarityLabel::Same,
            dedup_x1: true,
        }
    }
}

impl GenerationJobSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.pairs_per_label == 0 {
            return Err(PipelineError::InvalidSpec(
                "pairs_per_label must be at least 1",
            ));
        }
        if self.tries_per_pair < self.pairs_per_label {
            return Err(PipelineError::InvalidSpec(
                "tries_per_pair must be at least pairs_per_label",
            ));
        }
        Ok(())
    }
}

fn tokenize_prompt<M: LanguageModel + ?Sized>(
    backend: &M,
    text: &str,
) -> Result<Vec<TokenId>, LmError> {
    Ok(backend.tokenize(text)?.ids)
}

// ---------------------------------------------------------------------------
// First-sentence pools

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub requested: usize,
    pub collected: usize,
    pub attempts: usize,
    pub quote_terminated: usize,
    pub cap_terminated: usize,
    pub errors: usize,
    pub duplicates: usize,
    /// Quote-terminated sentences that were blank after trimming.
    pub empty: usize,
    /// The attempt ceiling was reached before `requested` sentences were found.
    pub partial: bool,
}

/// Collects seed-generation outcomes, in attempt order, into a pool.
#[derive(Clone, Debug)]
pub struct PoolBuilder {
    dedup: bool,
    sentences: Vec<String>,
    seen: BTreeSet<String>,
    stats: PoolStats,
}

impl PoolBuilder {
    pub fn new(requested: usize, dedup: bool) -> Result<Self, PipelineError> {
        if requested == 0 {
            return Err(PipelineError::EmptyPoolRequest);
        }
        Ok(PoolBuilder {
            dedup,
            sentences: Vec::new(),
            seen: BTreeSet::new(),
            stats: PoolStats {
                requested,
                ..PoolStats::default()
            },
        })
    }

    pub fn max_attempts(&self) -> usize {
        self.stats.requested.saturating_mul(POOL_ATTEMPT_FACTOR)
    }

    pub fn attempts(&self) -> usize {
        self.stats.attempts
    }

    pub fn collected(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_done(&self) -> bool {
        self.sentences.len() >= self.stats.requested || self.stats.attempts >= self.max_attempts()
    }

    /// Records the next attempt. Retryable backend errors are counted;
    /// anything else aborts pool construction.
    pub fn offer(
        &mut self,
        result: Result<GenerationOutcome, SamplerError>,
    ) -> Result<(), PipelineError> {
        if self.is_done() {
            return Ok(());
        }
        self.stats.attempts += 1;
        let outcome = match result {
            Ok(outcome) => outcome,
            Err(e) if e.is_retryable() => {
                self.stats.errors += 1;
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        if outcome.termination == Termination::TokenCap {
            self.stats.cap_terminated += 1;
            return Ok(());
        }
        self.stats.quote_terminated += 1;
        let sentence = outcome.text.trim();
        if check_sentence(sentence).is_err() {
            self.stats.empty += 1;
            return Ok(());
        }
        if self.dedup && !self.seen.insert(sentence.to_string()) {
            self.stats.duplicates += 1;
            return Ok(());
        }
        self.sentences.push(sentence.to_string());
        Ok(())
    }

    pub fn finish(mut self) -> (Vec<String>, PoolStats) {
        self.stats.collected = self.sentences.len();
        self.stats.partial = self.sentences.len() < self.stats.requested;
        (self.sentences, self.stats)
    }
}

/// Tokenized seed prompt shared by all pool attempts.
pub fn seed_prompt<M: LanguageModel + ?Sized>(
    backend: &M,
    instructions: &InstructionSet,
    spec: &GenerationJobSpec,
) -> Result<Vec<TokenId>, PipelineError> {
    let text = instructions.render_seed_instruction(spec.seed_label)?;
    Ok(tokenize_prompt(backend, &text)?)
}

/// A single first-sentence attempt with its own derived generator.
pub fn seed_attempt<M: LanguageModel + ?Sized>(
    backend: &M,
    prompt: &[TokenId],
    cfg: &SamplerConfig,
    attempt: usize,
    trace: Option<&mut dyn TraceSink>,
) -> Result<GenerationOutcome, SamplerError> {
    let mut rng = JobRng::seed_from_u64(pool_attempt_seed(cfg.seed, attempt));
    generate_seed(
        backend,
        LmContext::new(prompt.to_vec()),
        cfg,
        &mut rng,
        trace,
    )
}

/// Generates first sentences until `spec.x1_count` distinct ones exist or
/// the attempt ceiling is reached.
pub fn build_x1_pool<M: LanguageModel + ?Sized>(
    backend: &M,
    instructions: &InstructionSet,
    spec: &GenerationJobSpec,
    cfg: &SamplerConfig,
    mut trace: Option<&mut dyn TraceSink>,
) -> Result<(Vec<String>, PoolStats), PipelineError> {
    cfg.validate()?;
    let mut builder = PoolBuilder::new(spec.x1_count, spec.dedup_x1)?;
    let prompt = seed_prompt(backend, instructions, spec)?;
    while !builder.is_done() {
        let attempt = builder.attempts();
        if let Some(sink) = trace.as_deref_mut() {
            sink.begin_attempt(attempt);
        }
        let result = seed_attempt(backend, &prompt, cfg, attempt, reborrow(&mut trace));
        builder.offer(result)?;
    }
    Ok(builder.finish())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub lines: usize,
    pub blank: usize,
    pub duplicates: usize,
    /// Lines dropped because they contain a double quote.
    pub quoted: usize,
    pub kept: usize,
}

/// Parses a one-sentence-per-line pool, trimming each line.
pub fn ingest_x1_pool(
    text: &str,
    dedup: bool,
) -> Result<(Vec<String>, IngestStats), PipelineError> {
    let mut stats = IngestStats::default();
    let mut seen = BTreeSet::new();
    let mut pool = Vec::new();
    for line in text.lines() {
        stats.lines += 1;
        let sentence = line.trim();
        if sentence.is_empty() {
            stats.blank += 1;
        } else if sentence.contains('"') {
            stats.quoted += 1;
        } else if dedup && !seen.insert(sentence) {
            stats.duplicates += 1;
        } else {
            pool.push(sentence.to_string());
        }
    }
    stats.kept = pool.len();
    if pool.is_empty() {
        return Err(PipelineError::EmptyPool);
    }
    Ok((pool, stats))
}

// ---------------------------------------------------------------------------
// Pair generation

/// One (first sentence, label) generation job.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellJob<'a> {
    pub x1_index: usize,
    pub x1: &'a str,
    pub label: SimilarityLabel,
}

/// Enumerates jobs in (sentence index, ascending label) order.
pub fn cell_jobs<'a>(pool: &'a [String], labels: &[SimilarityLabel]) -> Vec<CellJob<'a>> {
    pool.iter()
        .enumerate()
        .flat_map(|(x1_index, x1)| {
            labels.iter().map(move |&label| CellJob {
                x1_index,
                x1: x1.as_str(),
                label,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub x1_index: usize,
    pub label: SimilarityLabel,
    pub attempts: usize,
    pub successes: usize,
    pub cap_terminated: usize,
    pub errors: usize,
    /// Some attempt failed on the backend and fewer than the wanted pairs were produced.
    pub failed: bool,
    pub last_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub records: Vec<PairRecord>,
    pub summary: CellSummary,
}

/// Runs up to `tries_per_pair` attempts for one cell, stopping after
/// `pairs_per_label` quote-terminated continuations.
pub fn run_cell<M: LanguageModel + ?Sized>(
    backend: &M,
    instructions: &InstructionSet,
    job: &CellJob<'_>,
    spec: &GenerationJobSpec,
    cfg: &SamplerConfig,
    mut trace: Option<&mut dyn TraceSink>,
) -> Result<CellResult, PipelineError> {
    let target_text = instructions.render_pair_instruction(job.label, job.x1)?;
    let counter_texts = instructions
        .counterlabels(job.label)
        .into_iter()
        .map(|cl| instructions.render_pair_instruction(cl, job.x1))
        .collect::<Result<Vec<_>, _>>()?;

    let mut summary = CellSummary {
        x1_index: job.x1_index,
        label: job.label,
        attempts: 0,
        successes: 0,
        cap_terminated: 0,
        errors: 0,
        failed: false,
        last_error: None,
    };
    let mut records = Vec::new();

    let prompts = tokenize_prompt(backend, &target_text).and_then(|target| {
        let counters = counter_texts
            .iter()
            .map(|t| tokenize_prompt(backend, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((target, counters))
    });
    let (target, counters) = match prompts {
        Ok(p) => p,
        Err(e) => {
            summary.failed = true;
            summary.errors = 1;
            summary.last_error = Some(e.to_string());
            return Ok(CellResult { records, summary });
        }
    };

    for attempt in 0..spec.tries_per_pair {
        if summary.successes >= spec.pairs_per_label {
            break;
        }
        summary.attempts += 1;
        if let Some(sink) = trace.as_deref_mut() {
            sink.begin_attempt(attempt);
        }
        let mut rng = JobRng::seed_from_u64(cell_attempt_seed(
            cfg.seed,
            job.x1_index,
            job.label,
            attempt,
        ));
        let result = generate_continuation(
            backend,
            LmContext::new(target.clone()),
            counters.iter().cloned().map(LmContext::new).collect(),
            cfg,
            &mut rng,
            reborrow(&mut trace),
        );
        match result {
            Ok(outcome) if outcome.termination == Termination::Quote => {
                summary.successes += 1;
                records.push(PairRecord::generated(
                    job.x1,
                    outcome.text.trim(),
                    job.label,
                ));
            }
            Ok(_) => summary.cap_terminated += 1,
            Err(SamplerError::Config(e)) => return Err(e.into()),
            Err(e) => {
                summary.errors += 1;
                summary.last_error = Some(e.to_string());
            }
        }
    }
    summary.failed = summary.errors > 0 && summary.successes < spec.pairs_per_label;
    Ok(CellResult { records, summary })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairsOutput {
    pub records: Vec<PairRecord>,
    pub cells: Vec<CellSummary>,
}

impl PairsOutput {
    /// Concatenates cell results in the order given.
    pub fn from_cells(results: impl IntoIterator<Item = CellResult>) -> Self {
        let mut out = PairsOutput::default();
        for r in results {
            out.records.extend(r.records);
            out.cells.push(r.summary);
        }
        out
    }

    pub fn attempts(&self) -> usize {
        self.cells.iter().map(|c| c.attempts).sum()
    }
}

/// Runs every cell sequentially.
pub fn generate_pairs<M: LanguageModel + ?Sized>(
    backend: &M,
    instructions: &InstructionSet,
    pool: &[String],
    spec: &GenerationJobSpec,
    cfg: &SamplerConfig,
    mut trace: Option<&mut dyn TraceSink>,
) -> Result<PairsOutput, PipelineError> {
    spec.validate()?;
    cfg.validate()?;
    if pool.is_empty() {
        return Err(PipelineError::EmptyPool);
    }
    let labels = instructions.labels();
    let mut results = Vec::new();
    for job in cell_jobs(pool, &labels) {
        results.push(run_cell(
            backend,
            instructions,
            &job,
            spec,
            cfg,
            reborrow(&mut trace),
        )?);
    }
    Ok(PairsOutput::from_cells(results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Distribution;
    use crate::table::TableLm;
    use crate::vocab::Vocabulary;
    use alloc::vec;

    /// Emits "A B" and then a quote, whatever the context.
    fn fixed_sentence_lm() -> TableLm {
        let vocab = Vocabulary::new(["A", "B", "\""]);
        let (a, b, q) = (
            vocab.id("A").unwrap(),
            vocab.id("B").unwrap(),
            vocab.id("\"").unwrap(),
        );
        let n = vocab.len();
        TableLm::new(vocab)
            .with(vec![], Distribution::point_mass(n, a).unwrap())
            .unwrap()
            .with(vec![a], Distribution::point_mass(n, b).unwrap())
            .unwrap()
            .with(vec![b], Distribution::point_mass(n, q).unwrap())
            .unwrap()
    }

    fn never_quote_lm() -> TableLm {
        let vocab = Vocabulary::new(["A", "B", "\""]);
        TableLm::new(vocab)
            .with(vec![], Distribution::new(vec![0.0, 0.5, 0.5, 0.0]).unwrap())
            .unwrap()
    }

    #[test]
    fn derived_seeds_differ_per_component() {
        let a = cell_attempt_seed(7, 0, SimilarityLabel::Same, 0);
        assert_ne!(a, cell_attempt_seed(7, 1, SimilarityLabel::Same, 0));
        assert_ne!(a, cell_attempt_seed(7, 0, SimilarityLabel::Similar, 0));
        assert_ne!(a, cell_attempt_seed(7, 0, SimilarityLabel::Same, 1));
        assert_ne!(a, cell_attempt_seed(8, 0, SimilarityLabel::Same, 0));
        assert_ne!(pool_attempt_seed(7, 0), postprocess_seed(7));
        assert_eq!(a, cell_attempt_seed(7, 0, SimilarityLabel::Same, 0));
    }

    #[test]
    fn deterministic_lm_yields_single_sentence_pool() {
        let lm = fixed_sentence_lm();
        let spec = GenerationJobSpec {
            x1_count: 3,
            ..Default::default()
        };
        let (pool, stats) = build_x1_pool(
            &lm,
            &InstructionSet::default(),
            &spec,
            &SamplerConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(pool, vec!["A B".to_string()]);
        assert!(stats.partial);
        assert_eq!(stats.attempts, 30);
        assert_eq!(stats.duplicates, 29);
        let (pool, stats) = build_x1_pool(
            &lm,
            &InstructionSet::default(),
            &GenerationJobSpec {
                x1_count: 1,
                ..Default::default()
            },
            &SamplerConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(pool.len(), 1);
        assert!(!stats.partial);
        assert_eq!(stats.attempts, 1);
    }

    #[test]
    fn zero_pool_rejected() {
        let spec = GenerationJobSpec {
            x1_count: 0,
            ..Default::default()
        };
        assert_eq!(
            build_x1_pool(
                &fixed_sentence_lm(),
                &InstructionSet::default(),
                &spec,
                &SamplerConfig::default(),
                None
            )
            .unwrap_err(),
            PipelineError::EmptyPoolRequest
        );
    }

    #[test]
    fn cap_terminated_seeds_are_discarded() {
        let spec = GenerationJobSpec {
            x1_count: 2,
            ..Default::default()
        };
        let cfg = SamplerConfig {
            max_tokens: 3,
            ..Default::default()
        };
        let (pool, stats) = build_x1_pool(
            &never_quote_lm(),
            &InstructionSet::default(),
            &spec,
            &cfg,
            None,
        )
        .unwrap();
        assert!(pool.is_empty());
        assert_eq!(stats.cap_terminated, 20);
        assert!(stats.partial);
    }

    #[test]
    fn ingest_dedups_and_drops_quotes() {
        let (pool, stats) = ingest_x1_pool("a\na\nb\nsay \"hi\"\n\n", true).unwrap();
        assert_eq!(pool, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(stats.duplicates, 1);
        assert_eq!(stats.quoted, 1);
        assert_eq!(stats.blank, 1);
        assert_eq!(stats.kept, 2);
        assert_eq!(
            ingest_x1_pool("", true).unwrap_err(),
            PipelineError::EmptyPool
        );
        let (pool, _) = ingest_x1_pool("a\na", false).unwrap();
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn all_success_yields_two_pairs_per_label() {
        let out = generate_pairs(
            &fixed_sentence_lm(),
            &InstructionSet::default(),
            &["x".to_string()],
            &GenerationJobSpec::default(),
            &SamplerConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(out.records.len(), 6);
        assert!(out
            .cells
            .iter()
            .all(|c| c.attempts == 2 && c.successes == 2));
        assert!(out.records.iter().all(|r| r.text_b == "A B"));
        let labels: Vec<_> = out.records.iter().map(|r| r.score).collect();
        assert_eq!(labels, vec![0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn never_quoting_lm_spends_whole_budget() {
        let out = generate_pairs(
            &never_quote_lm(),
            &InstructionSet::default(),
            &["x".to_string()],
            &GenerationJobSpec::default(),
            &SamplerConfig {
                max_tokens: 4,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.attempts(), 15);
        assert!(out.cells.iter().all(|c| c.cap_terminated == 5));
    }

    #[test]
    fn same_label_cells_have_no_counter_contexts() {
        struct Counters(Vec<usize>);
        impl TraceSink for Counters {
            fn record(&mut self, step: &crate::sampler::StepTrace) {
                self.0.push(step.counter_top.len());
            }
        }
        let lm = fixed_sentence_lm();
        let pool = ["x".to_string()];
        for (label, expected) in [
            (SimilarityLabel::Same, 0),
            (SimilarityLabel::Similar, 1),
            (SimilarityLabel::Different, 2),
        ] {
            let mut sink = Counters(Vec::new());
            run_cell(
                &lm,
                &InstructionSet::default(),
                &CellJob {
                    x1_index: 0,
                    x1: &pool[0],
                    label,
                },
                &GenerationJobSpec::default(),
                &SamplerConfig::default(),
                Some(&mut sink),
            )
            .unwrap();
            assert!(!sink.0.is_empty());
            assert!(sink.0.iter().all(|&n| n == expected));
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = GenerationJobSpec {
            pairs_per_label: 3,
            tries_per_pair: 2,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }
}
