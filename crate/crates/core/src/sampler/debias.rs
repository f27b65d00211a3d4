use alloc::vec::Vec;

use serde::Serialize;

use crate::dist::{Distribution, DistributionError};

/// Per-token penalties applied by [`self_debias_adjust`].
///
/// Both vectors are empty when there were no counter distributions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PenaltyReport {
    /// Target probability minus the largest counter probability.
    pub deltas: Vec<f64>,
    /// Multiplier applied to each token's probability.
    pub alphas: Vec<f64>,
    /// Tokens whose factor is below 1.
    pub penalized: usize,
    /// Every weight underflowed to zero and the target's argmax was used instead.
    pub fallback: bool,
}

impl PenaltyReport {
    pub fn alpha(&self, index: usize) -> f64 {
        self.alphas.get(index).copied().unwrap_or(1.0)
    }
}

/// Down-weights tokens that are more likely under any counter distribution
/// than under the target.
///
/// A token with `delta = target - max(counters) < 0` has its probability
/// multiplied by `exp(lambda * delta)`; other tokens keep theirs. The weights
/// are renormalized unless nothing was penalized, in which case `target` is
/// returned unchanged.
pub fn self_debias_adjust(
    target: &Distribution,
    counters: &[Distribution],
    lambda: f64,
) -> Result<(Distribution, PenaltyReport), DistributionError> {
    if let Some(bad) = counters.iter().find(|c| c.len() != target.len()) {
        return Err(DistributionError::LengthMismatch {
            expected: target.len(),
            actual: bad.len(),
        });
    }
    if counters.is_empty() {
        return Ok((target.clone(), PenaltyReport::default()));
    }

    let n = target.len();
    let mut deltas = Vec::with_capacity(n);
    let mut alphas = Vec::with_capacity(n);
    let mut penalized = 0;
    for (t, &p) in target.probs().iter().enumerate() {
        let strongest = counters
            .iter()
            .map(|c| c.probs()[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let delta = p - strongest;
        let alpha = if delta < 0.0 {
            libm::exp(lambda * delta)
        } else {
            1.0
        };
        if alpha < 1.0 {
            penalized += 1;
        }
        deltas.push(delta);
        alphas.push(alpha);
    }

    let mut report = PenaltyReport {
        deltas,
        alphas,
        penalized,
        fallback: false,
    };
    if penalized == 0 {
        return Ok((target.clone(), report));
    }

    let weights: Vec<f64> = target
        .probs()
        .iter()
        .zip(&report.alphas)
        .map(|(p, a)| p * a)
        .collect();
    match Distribution::from_weights(weights) {
        Ok(adjusted) => Ok((adjusted, report)),
        Err(DistributionError::ZeroMass) => {
            report.fallback = true;
            Ok((Distribution::point_mass(n, target.argmax())?, report))
        }
        Err(e) => Err(e),
    }
}
