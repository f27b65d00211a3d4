//! Top-k and nucleus truncation, and drawing a token from a distribution.
//!
//! Both filters rank tokens by descending probability with ascending id as
//! the tie-break, keep a prefix of that ranking and renormalize. A filter that
//! would keep the whole support returns its input untouched.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::dist::{Distribution, TokenId};

/// Slack when comparing cumulative nucleus mass against `p`, so that `p = 1`
/// keeps the full support despite rounding in the running sum.
pub const NUCLEUS_EPS: f64 = 1e-12;

/// Ids of the `k` most probable tokens with non-zero probability, best first.
pub fn top_k_survivors(dist: &Distribution, k: usize) -> Vec<TokenId> {
    let k = k.max(1);
    dist.ranked()
        .into_iter()
        .take_while(|t| dist.prob(*t) > 0.0)
        .take(k)
        .collect()
}

/// The shortest ranked prefix whose mass reaches `p`, best first.
pub fn nucleus(dist: &Distribution, p: f64) -> Vec<TokenId> {
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for t in dist.ranked() {
        let prob = dist.prob(t);
        if prob <= 0.0 {
            break;
        }
        kept.push(t);
        mass += prob;
        if mass >= p - NUCLEUS_EPS {
            break;
        }
    }
    kept
}

pub fn top_k_filter(dist: &Distribution, k: usize) -> Distribution {
    debug_assert!(k >= 1);
    restrict(dist, &top_k_survivors(dist, k))
}

pub fn top_p_filter(dist: &Distribution, p: f64) -> Distribution {
    debug_assert!(p > 0.0 && p <= 1.0);
    restrict(dist, &nucleus(dist, p))
}

fn restrict(dist: &Distribution, kept: &[TokenId]) -> Distribution {
    if kept.len() >= dist.support_size() {
        return dist.clone();
    }
    let mut weights = alloc::vec![0.0; dist.len()];
    for &t in kept {
        weights[t.index()] = dist.prob(t);
    }
    Distribution::from_weights(weights).expect("kept tokens have positive mass")
}

/// Inverse-CDF draw using one uniform `f64` from `rng`.
pub fn sample_token<R: RngCore + ?Sized>(dist: &Distribution, rng: &mut R) -> TokenId {
    let u: f64 = rng.gen::<f64>() * dist.total();
    let mut cumulative = 0.0;
    let mut last_positive = dist.argmax();
    for (i, &p) in dist.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        last_positive = TokenId::from(i);
        if u < cumulative {
            return last_positive;
        }
    }
    last_positive
}
