//! Closed word-level vocabularies used by the table and n-gram backends.
//!
//! Text is segmented on whitespace, and every punctuation character is a
//! token of its own, so the quotation mark that ends a generation is always
//! a standalone token. Decoding joins tokens with a single space, except that
//! punctuation attaches to whatever precedes it. Strings produced by
//! [`Vocabulary::decode`] therefore survive a tokenize/decode round trip.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dist::TokenId;

/// Reserved id for text outside a closed vocabulary.
pub const UNKNOWN: TokenId = TokenId(0);
pub const UNKNOWN_TEXT: &str = "<unk>";

/// Result of tokenizing text with a backend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tokenized {
    pub ids: Vec<TokenId>,
    /// `false` when decoding `ids` would not reproduce the input.
    pub lossless: bool,
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}

/// Splits text into word and punctuation pieces.
pub fn split_words(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    for chunk in text.split_whitespace() {
        let mut start = None;
        for (i, c) in chunk.char_indices() {
            if is_punct(c) {
                if let Some(s) = start.take() {
                    pieces.push(&chunk[s..i]);
                }
                pieces.push(&chunk[i..i + c.len_utf8()]);
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            pieces.push(&chunk[s..]);
        }
    }
    pieces
}

fn is_punct_token(token: &str) -> bool {
    let mut chars = token.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if is_punct(c))
}

/// Joins word pieces back into text.
pub fn join_words<'a>(pieces: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for piece in pieces {
        if !out.is_empty() && !is_punct_token(piece) {
            out.push(' ');
        }
        out.push_str(piece);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from token strings in first-seen order.
    ///
    /// Id 0 is always [`UNKNOWN`]; duplicates and the unknown marker are skipped.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocabulary {
            tokens: alloc::vec![UNKNOWN_TEXT.to_string()],
            index: BTreeMap::new(),
        };
        vocab.index.insert(UNKNOWN_TEXT.to_string(), UNKNOWN);
        for token in tokens {
            vocab.insert(token.as_ref());
        }
        vocab
    }

    /// Vocabulary covering every piece of `text`.
    pub fn from_text(text: &str) -> Self {
        Self::new(split_words(text))
    }

    pub(crate) fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = TokenId::from(self.tokens.len());
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn text(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.tokens.len()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn tokenize(&self, text: &str) -> Tokenized {
        let ids: Vec<TokenId> = split_words(text)
            .into_iter()
            .map(|piece| self.id(piece).unwrap_or(UNKNOWN))
            .collect();
        let lossless = !ids.contains(&UNKNOWN) && self.decode(&ids).as_deref() == Some(text);
        Tokenized { ids, lossless }
    }

    /// Decodes ids; `None` if any id is outside the vocabulary.
    pub fn decode(&self, ids: &[TokenId]) -> Option<String> {
        let mut pieces = Vec::with_capacity(ids.len());
        for &id in ids {
            pieces.push(self.text(id)?);
        }
        Some(join_words(pieces))
    }
}
