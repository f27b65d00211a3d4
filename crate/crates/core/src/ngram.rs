//! Word n-gram model with additive smoothing and unweighted back-off.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::{Distribution, TokenId};
use crate::lm::{check_context, LanguageModel, LmContext, LmError};
use crate::table::decode_with;
use crate::vocab::{split_words, Tokenized, Vocabulary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NgramError {
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("smoothing constant must be finite and non-negative, got {0}")]
    InvalidSmoothing(f64),
}

#[derive(Clone, Debug, Default)]
struct Continuations {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

#[derive(Clone, Debug)]
pub struct NgramLm {
    order: usize,
    smoothing: f64,
    vocab: Vocabulary,
    /// Keyed by history; the empty history holds unigram counts.
    counts: BTreeMap<Vec<TokenId>, Continuations>,
}

/// Counts every n-gram of length 1..=`order` in `corpus`.
pub fn train_ngram(corpus: &str, order: usize, smoothing: f64) -> Result<NgramLm, NgramError> {
    if order == 0 {
        return Err(NgramError::ZeroOrder);
    }
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(NgramError::InvalidSmoothing(smoothing));
    }
    let words = split_words(corpus);
    if words.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    let vocab = Vocabulary::new(&words);
    let ids: Vec<TokenId> = words.iter().map(|w| vocab.id(w).unwrap()).collect();

    let mut counts: BTreeMap<Vec<TokenId>, Continuations> = BTreeMap::new();
    for (i, &next) in ids.iter().enumerate() {
        for history_len in 0..order.min(i + 1) {
            let entry = counts.entry(ids[i - history_len..i].to_vec()).or_default();
            entry.total += 1;
            *entry.next.entry(next).or_default() += 1;
        }
    }
    Ok(NgramLm {
        order,
        smoothing,
        vocab,
        counts,
    })
}

impl NgramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Counts for the longest seen suffix of `history`, down to unigrams.
    fn backoff(&self, history: &[TokenId]) -> &Continuations {
        let max = (self.order - 1).min(history.len());
        for len in (1..=max).rev() {
            if let Some(c) = self.counts.get(&history[history.len() - len..]) {
                if c.total > 0 {
                    return c;
                }
            }
        }
        &self.counts[&Vec::new()]
    }
}

impl LanguageModel for NgramLm {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_token_distribution(&self, context: &LmContext) -> Result<Distribution, LmError> {
        check_context(context, self.vocab.len())?;
        let seen = self.backoff(context.tokens());
        let mut weights = alloc::vec![self.smoothing; self.vocab.len()];
        for (&token, &count) in &seen.next {
            weights[token.index()] += count as f64;
        }
        Ok(Distribution::from_weights(weights)?)
    }

    fn tokenize(&self, text: &str) -> Result<Tokenized, LmError> {
        Ok(self.vocab.tokenize(text))
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        decode_with(&self.vocab, tokens)
    }
}
