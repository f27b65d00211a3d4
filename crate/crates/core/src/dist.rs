//! Token ids and next-token probability vectors.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Allowed deviation of a distribution's total mass from 1.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Index into a backend-owned vocabulary.
///
/// Ids are only meaningful for the backend that produced them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for TokenId {
    fn from(value: usize) -> Self {
        TokenId(value as u32)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("distribution is empty")]
    Empty,
    #[error("entry {index} is not a finite non-negative probability ({value})")]
    InvalidEntry { index: usize, value: f64 },
    #[error("total mass {total} is not within {MASS_TOLERANCE:e} of 1")]
    NotNormalized { total: f64 },
    #[error("weights have no positive mass")]
    ZeroMass,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// A probability vector over a vocabulary.
///
/// Entries are finite and non-negative and sum to 1 within [`MASS_TOLERANCE`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Wraps an already normalized vector, checking the invariants.
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        check_entries(&probs)?;
        let total = kahan_sum(&probs);
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(DistributionError::NotNormalized { total });
        }
        Ok(Distribution { probs })
    }

    /// Normalizes a vector of non-negative weights.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self, DistributionError> {
        check_entries(&weights)?;
        let total = kahan_sum(&weights);
        if !total.is_finite() || total <= 0.0 {
            return Err(DistributionError::ZeroMass);
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Distribution { probs: weights })
    }

    pub fn uniform(size: usize) -> Result<Self, DistributionError> {
        if size == 0 {
            return Err(DistributionError::Empty);
        }
        Ok(Distribution {
            probs: alloc::vec![1.0 / size as f64; size],
        })
    }

    /// All mass on a single token.
    pub fn point_mass(size: usize, token: TokenId) -> Result<Self, DistributionError> {
        if token.index() >= size {
            return Err(DistributionError::LengthMismatch {
                expected: size,
                actual: token.index() + 1,
            });
        }
        let mut probs = alloc::vec![0.0; size];
        probs[token.index()] = 1.0;
        Ok(Distribution { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        self.probs.get(token.index()).copied().unwrap_or(0.0)
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn total(&self) -> f64 {
        kahan_sum(&self.probs)
    }

    /// Number of tokens with non-zero probability.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Token ids ordered by descending probability, ties broken by ascending id.
    pub fn ranked(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.probs.len()).map(TokenId::from).collect();
        ids.sort_by(|a, b| {
            self.probs[b.index()]
                .total_cmp(&self.probs[a.index()])
                .then(a.cmp(b))
        });
        ids
    }

    /// The `n` most probable tokens with their probabilities (zero entries omitted).
    pub fn top(&self, n: usize) -> Vec<(TokenId, f64)> {
        self.ranked()
            .into_iter()
            .filter(|t| self.probs[t.index()] > 0.0)
            .take(n)
            .map(|t| (t, self.probs[t.index()]))
            .collect()
    }

    /// Most probable token, lowest id on ties.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        TokenId::from(best)
    }
}

fn check_entries(values: &[f64]) -> Result<(), DistributionError> {
    if values.is_empty() {
        return Err(DistributionError::Empty);
    }
    match values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        Some((index, &value)) => Err(DistributionError::InvalidEntry { index, value }),
        None => Ok(()),
    }
}

/// Compensated summation; long vocabularies otherwise drift noticeably.
pub(crate) fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}
