//! Decoding with counterlabel self-debiasing.
//!
//! Each step queries the backend once for the target context and once per
//! counter context, penalizes tokens the counters prefer, truncates with
//! top-k and nucleus filtering, and samples. Generation stops at the first
//! token whose text contains a quotation mark, or after `max_tokens` tokens.

mod debias;
mod filters;
mod trace;

use alloc::string::String;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, DistributionError, TokenId};
use crate::lm::{LanguageModel, LmContext, LmError};

pub use debias::{self_debias_adjust, PenaltyReport};
pub use filters::{
    nucleus, sample_token, top_k_filter, top_k_survivors, top_p_filter, NUCLEUS_EPS,
};
pub use trace::{reborrow, StepTrace, TokenPenalty, TokenProb, TraceSink, TRACE_TOP_N};

/// Character that closes a generated sentence.
pub const QUOTE: char = '"';

/// Order in which the two truncation filters run after the penalty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrder {
    #[default]
    TopKThenTopP,
    TopPThenTopK,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Decay constant of the self-debiasing penalty.
    pub lambda: f64,
    pub top_p: f64,
    /// `None` disables top-k truncation. Written as an integer in config
    /// files, where 0 stands for `None`.
    #[serde(with = "top_k_serde")]
    pub top_k: Option<usize>,
    pub max_tokens: usize,
    pub seed: u64,
    pub filter_order: FilterOrder,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            lambda: 100.0,
            top_p: 0.9,
            top_k: Some(5),
            max_tokens: 40,
            seed: 42,
            filter_order: FilterOrder::TopKThenTopP,
        }
    }
}

mod top_k_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(k.unwrap_or(0) as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        let k = usize::deserialize(d)?;
        Ok((k > 0).then_some(k))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("lambda must be finite and non-negative, got {0}")]
    Lambda(f64),
    #[error("top_p must lie in (0, 1], got {0}")]
    TopP(f64),
    #[error("top_k must be at least 1")]
    TopK,
    #[error("max_tokens must be at least 1")]
    MaxTokens,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(ConfigError::Lambda(self.lambda));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ConfigError::TopP(self.top_p));
        }
        if self.top_k == Some(0) {
            return Err(ConfigError::TopK);
        }
        if self.max_tokens == 0 {
            return Err(ConfigError::MaxTokens);
        }
        Ok(())
    }

    /// Settings for seed-sentence generation: nucleus only, no penalty.
    pub fn for_seed_sentences(&self) -> SamplerConfig {
        SamplerConfig {
            top_k: None,
            lambda: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error(transparent)]
    Backend(#[from] LmError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("counter contexts must share the target's generated suffix")]
    DivergentContexts,
}

impl SamplerError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SamplerError::Backend(e) if e.is_retryable())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Quote,
    TokenCap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationOutcome {
    /// Generated text up to, not including, the closing quote.
    pub text: String,
    pub termination: Termination,
    /// Sampled tokens, counting the one carrying the quote.
    pub tokens_used: usize,
}

/// Everything computed for one decoding step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub target: Distribution,
    pub counters: Vec<Distribution>,
    pub adjusted: Distribution,
    pub penalty: PenaltyReport,
    pub top_k_kept: Option<Vec<TokenId>>,
    pub top_p_kept: Vec<TokenId>,
    /// The distribution the next token is drawn from.
    pub sampling: Distribution,
}

/// Computes the sampling distribution for the next token.
pub fn decode_step<M: LanguageModel + ?Sized>(
    backend: &M,
    target: &LmContext,
    counters: &[LmContext],
    cfg: &SamplerConfig,
) -> Result<Step, SamplerError> {
    let target_dist = backend.next_token_distribution(target)?;
    let counter_dists = counters
        .iter()
        .map(|c| backend.next_token_distribution(c))
        .collect::<Result<Vec<_>, _>>()?;
    let (adjusted, penalty) = self_debias_adjust(&target_dist, &counter_dists, cfg.lambda)?;

    let mut top_k_kept = None;
    let mut top_p_kept = Vec::new();
    let mut current = adjusted.clone();
    let stages: [bool; 2] = match cfg.filter_order {
        FilterOrder::TopKThenTopP => [true, false],
        FilterOrder::TopPThenTopK => [false, true],
    };
    for is_top_k in stages {
        if is_top_k {
            if let Some(k) = cfg.top_k {
                let kept = top_k_survivors(&current, k);
                current = top_k_filter(&current, k);
                top_k_kept = Some(kept);
            }
        } else {
            top_p_kept = nucleus(&current, cfg.top_p);
            current = top_p_filter(&current, cfg.top_p);
        }
    }

    Ok(Step {
        target: target_dist,
        counters: counter_dists,
        adjusted,
        penalty,
        top_k_kept,
        top_p_kept,
        sampling: current,
    })
}

/// Samples a continuation of `target` until a quote token or the token cap.
///
/// Counter contexts advance in lockstep with the target: every sampled token
/// is appended to all of them.
pub fn generate_continuation<M, R>(
    backend: &M,
    mut target: LmContext,
    mut counters: Vec<LmContext>,
    cfg: &SamplerConfig,
    rng: &mut R,
    mut trace: Option<&mut dyn TraceSink>,
) -> Result<GenerationOutcome, SamplerError>
where
    M: LanguageModel + ?Sized,
    R: RngCore + ?Sized,
{
    cfg.validate()?;
    if counters.iter().any(|c| c.generated() != target.generated()) {
        return Err(SamplerError::DivergentContexts);
    }

    for step_index in 0..cfg.max_tokens {
        let step = decode_step(backend, &target, &counters, cfg)?;
        let token = sample_token(&step.sampling, rng);
        let token_text = backend.token_text(token)?;
        if let Some(sink) = trace.as_deref_mut() {
            sink.record(&StepTrace::new(step_index, &step, token, &token_text));
        }

        if token_text.contains(QUOTE) {
            let mut tokens = target.generated().to_vec();
            tokens.push(token);
            let full = backend.decode(&tokens)?;
            let text = match full.find(QUOTE) {
                Some(at) => String::from(&full[..at]),
                None => full,
            };
            return Ok(GenerationOutcome {
                text,
                termination: Termination::Quote,
                tokens_used: step_index + 1,
            });
        }

        target.push(token);
        for c in &mut counters {
            c.push(token);
        }
    }

    Ok(GenerationOutcome {
        text: backend.decode(target.generated())?,
        termination: Termination::TokenCap,
        tokens_used: cfg.max_tokens,
    })
}

/// Samples a first sentence: nucleus filtering only, no counter contexts.
pub fn generate_seed<M, R>(
    backend: &M,
    seed_context: LmContext,
    cfg: &SamplerConfig,
    rng: &mut R,
    trace: Option<&mut dyn TraceSink>,
) -> Result<GenerationOutcome, SamplerError>
where
    M: LanguageModel + ?Sized,
    R: RngCore + ?Sized,
{
    generate_continuation(
        backend,
        seed_context,
        Vec::new(),
        &cfg.for_seed_sentences(),
        rng,
        trace,
    )
}
