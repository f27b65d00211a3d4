use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use super::Step;
use crate::dist::{Distribution, TokenId};

/// How many of the most probable tokens a trace record lists per distribution.
pub const TRACE_TOP_N: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TokenProb {
    pub token: TokenId,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TokenPenalty {
    pub token: TokenId,
    pub delta: f64,
    pub alpha: f64,
}

/// One decoding step, as written to a trace log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepTrace {
    pub step: usize,
    pub target_top: Vec<TokenProb>,
    pub counter_top: Vec<Vec<TokenProb>>,
    /// Penalties for every token listed in `target_top` or `counter_top`.
    pub penalties: Vec<TokenPenalty>,
    pub penalized: usize,
    pub fallback: bool,
    pub top_k_kept: Option<Vec<TokenId>>,
    pub top_p_kept: Vec<TokenId>,
    pub sampled: TokenId,
    pub sampled_text: String,
    pub sampled_prob: f64,
}

fn top(dist: &Distribution) -> Vec<TokenProb> {
    dist.top(TRACE_TOP_N)
        .into_iter()
        .map(|(token, prob)| TokenProb { token, prob })
        .collect()
}

impl StepTrace {
    pub fn new(step: usize, s: &Step, sampled: TokenId, sampled_text: &str) -> Self {
        let target_top = top(&s.target);
        let counter_top: Vec<Vec<TokenProb>> = s.counters.iter().map(top).collect();
        let mut penalties = Vec::new();
        if !s.penalty.deltas.is_empty() {
            let listed: BTreeSet<TokenId> = target_top
                .iter()
                .chain(counter_top.iter().flatten())
                .map(|tp| tp.token)
                .collect();
            penalties = listed
                .into_iter()
                .map(|token| TokenPenalty {
                    token,
                    delta: s.penalty.deltas[token.index()],
                    alpha: s.penalty.alphas[token.index()],
                })
                .collect();
        }
        StepTrace {
            step,
            target_top,
            counter_top,
            penalties,
            penalized: s.penalty.penalized,
            fallback: s.penalty.fallback,
            top_k_kept: s.top_k_kept.clone(),
            top_p_kept: s.top_p_kept.clone(),
            sampled,
            sampled_text: String::from(sampled_text),
            sampled_prob: s.sampling.prob(sampled),
        }
    }
}

/// Receives one record per decoding step.
pub trait TraceSink {
    fn record(&mut self, step: &StepTrace);

    /// Called before each generation attempt of a job.
    fn begin_attempt(&mut self, _attempt: usize) {}
}

impl TraceSink for Vec<StepTrace> {
    fn record(&mut self, step: &StepTrace) {
        self.push(step.clone());
    }
}

/// Reborrows an optional sink for a nested call.
pub fn reborrow<'a>(sink: &'a mut Option<&mut dyn TraceSink>) -> Option<&'a mut dyn TraceSink> {
    match sink {
        Some(s) => Some(&mut **s),
        None => None,
    }
}
