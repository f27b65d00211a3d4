//! A lookup-table language model with explicit distributions.
//!
//! Each entry maps a token sequence to the distribution that follows it. A
//! query uses the entry for the longest stored sequence that is a suffix of the
//! context; contexts matching nothing get the uniform fallback. An entry keyed
//! on the empty sequence therefore acts as the default.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, DistributionError, TokenId};
use crate::lm::{check_context, LanguageModel, LmContext, LmError};
use crate::vocab::{Tokenized, Vocabulary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("unknown token {0:?} in table")]
    UnknownToken(String),
    #[error("invalid distribution after context {context:?}: {source}")]
    Distribution {
        context: Vec<String>,
        source: DistributionError,
    },
    #[error("token {0} is outside the vocabulary")]
    InvalidToken(TokenId),
}

/// Serializable description of a [`TableLm`], keyed by token text.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub vocab: Vec<String>,
    #[serde(default)]
    pub transitions: Vec<TransitionSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    #[serde(default)]
    pub context: Vec<String>,
    /// Probability per token; omitted tokens get zero.
    pub next: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct TableLm {
    vocab: Vocabulary,
    transitions: BTreeMap<Vec<TokenId>, Distribution>,
    longest_key: usize,
    fallback: Distribution,
}

impl TableLm {
    pub fn new(vocab: Vocabulary) -> Self {
        let fallback = Distribution::uniform(vocab.len()).expect("vocabulary is never empty");
        TableLm {
            vocab,
            transitions: BTreeMap::new(),
            longest_key: 0,
            fallback,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Registers the distribution that follows `context`.
    pub fn insert(&mut self, context: Vec<TokenId>, next: Distribution) -> Result<(), TableError> {
        if let Some(&bad) = context.iter().find(|t| !self.vocab.contains(**t)) {
            return Err(TableError::InvalidToken(bad));
        }
        if next.len() != self.vocab.len() {
            return Err(TableError::Distribution {
                context: self.texts(&context),
                source: DistributionError::LengthMismatch {
                    expected: self.vocab.len(),
                    actual: next.len(),
                },
            });
        }
        self.longest_key = self.longest_key.max(context.len());
        self.transitions.insert(context, next);
        Ok(())
    }

    pub fn with(mut self, context: Vec<TokenId>, next: Distribution) -> Result<Self, TableError> {
        self.insert(context, next)?;
        Ok(self)
    }

    pub fn from_spec(spec: &TableSpec) -> Result<Self, TableError> {
        let mut lm = TableLm::new(Vocabulary::new(&spec.vocab));
        for transition in &spec.transitions {
            let context = transition
                .context
                .iter()
                .map(|w| lm.lookup(w))
                .collect::<Result<Vec<_>, _>>()?;
            let mut probs = alloc::vec![0.0; lm.vocab.len()];
            for (word, &p) in &transition.next {
                probs[lm.lookup(word)?.index()] = p;
            }
            let next = Distribution::new(probs).map_err(|source| TableError::Distribution {
                context: transition.context.clone(),
                source,
            })?;
            lm.insert(context, next)?;
        }
        Ok(lm)
    }

    fn lookup(&self, word: &str) -> Result<TokenId, TableError> {
        self.vocab
            .id(word)
            .ok_or_else(|| TableError::UnknownToken(String::from(word)))
    }

    fn texts(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&t| String::from(self.vocab.text(t).unwrap_or("?")))
            .collect()
    }

    fn distribution_for(&self, tokens: &[TokenId]) -> &Distribution {
        let max = self.longest_key.min(tokens.len());
        for len in (0..=max).rev() {
            if let Some(dist) = self.transitions.get(&tokens[tokens.len() - len..]) {
                return dist;
            }
        }
        &self.fallback
    }
}

impl LanguageModel for TableLm {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_token_distribution(&self, context: &LmContext) -> Result<Distribution, LmError> {
        check_context(context, self.vocab.len())?;
        Ok(self.distribution_for(context.tokens()).clone())
    }

    fn tokenize(&self, text: &str) -> Result<Tokenized, LmError> {
        Ok(self.vocab.tokenize(text))
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        decode_with(&self.vocab, tokens)
    }
}

pub(crate) fn decode_with(vocab: &Vocabulary, tokens: &[TokenId]) -> Result<String, LmError> {
    vocab.decode(tokens).ok_or_else(|| {
        let token = *tokens.iter().find(|t| !vocab.contains(**t)).unwrap();
        LmError::InvalidToken {
            token,
            vocab_size: vocab.len(),
        }
    })
}
