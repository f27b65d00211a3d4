//! The language-model interface the sampler drives.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::{Distribution, DistributionError, TokenId};
use crate::vocab::Tokenized;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmError {
    /// A remote call failed; retrying the same request may succeed.
    #[error("transport failure for context {context_hash:016x}: {message}")]
    Transport { context_hash: u64, message: String },
    #[error("backend returned {actual} probabilities but the vocabulary has {expected}")]
    VocabMismatch { expected: usize, actual: usize },
    #[error("token {token} is outside the vocabulary of size {vocab_size}")]
    InvalidToken { token: TokenId, vocab_size: usize },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

impl LmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LmError::Transport { .. })
    }
}

/// An instruction prefix followed by the tokens generated so far.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LmContext {
    tokens: Vec<TokenId>,
    prefix_len: usize,
}

impl LmContext {
    pub fn new(prefix: Vec<TokenId>) -> Self {
        let prefix_len = prefix.len();
        LmContext {
            tokens: prefix,
            prefix_len,
        }
    }

    pub fn push(&mut self, token: TokenId) {
        self.tokens.push(token);
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn prefix(&self) -> &[TokenId] {
        &self.tokens[..self.prefix_len]
    }

    pub fn generated(&self) -> &[TokenId] {
        &self.tokens[self.prefix_len..]
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    /// FNV-1a over the token ids, used to identify a context in error reports.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for b in t.0.to_le_bytes() {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }
}

/// A source of next-token distributions.
///
/// Implementations must return identical distributions for identical contexts
/// and must be usable from several threads at once when they are `Sync`.
pub trait LanguageModel {
    fn vocab_size(&self) -> usize;

    fn next_token_distribution(&self, context: &LmContext) -> Result<Distribution, LmError>;

    fn tokenize(&self, text: &str) -> Result<Tokenized, LmError>;

    fn decode(&self, tokens: &[TokenId]) -> Result<String, LmError>;

    /// Text of a single token.
    fn token_text(&self, token: TokenId) -> Result<String, LmError> {
        self.decode(&[token])
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_distribution(&self, context: &LmContext) -> Result<Distribution, LmError> {
        (**self).next_token_distribution(context)
    }

    fn tokenize(&self, text: &str) -> Result<Tokenized, LmError> {
        (**self).tokenize(text)
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        (**self).decode(tokens)
    }

    fn token_text(&self, token: TokenId) -> Result<String, LmError> {
        (**self).token_text(token)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for alloc::boxed::Box<M> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_distribution(&self, context: &LmContext) -> Result<Distribution, LmError> {
        (**self).next_token_distribution(context)
    }

    fn tokenize(&self, text: &str) -> Result<Tokenized, LmError> {
        (**self).tokenize(text)
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        (**self).decode(tokens)
    }

    fn token_text(&self, token: TokenId) -> Result<String, LmError> {
        (**self).token_text(token)
    }
}

pub(crate) fn check_context(context: &LmContext, vocab_size: usize) -> Result<(), LmError> {
    match context.tokens().iter().find(|t| t.index() >= vocab_size) {
        Some(&token) => Err(LmError::InvalidToken { token, vocab_size }),
        None => Ok(()),
    }
}
