//! Brute-force reference for quote-terminated decoding on small table models.
//!
//! The per-step arithmetic (penalty, top-k, nucleus) is written out here
//! directly from its definition and shares no code with the crate's sampler.
//! Path probabilities are obtained by enumerating every token sequence up to
//! the token cap.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dino_core::sampler::{GenerationOutcome, SamplerConfig, Termination};
use dino_core::{Distribution, TableLm, TokenId, Vocabulary};
use rand::Rng;

pub const NUCLEUS_SLACK: f64 = 1e-12;

/// A random table model with one instruction prefix per active label.
pub struct ToyWorld {
    pub lm: TableLm,
    pub words: Vec<TokenId>,
    pub quote: TokenId,
    /// Target prefix first, then one per counter.
    pub prefixes: Vec<Vec<TokenId>>,
    /// Oracle's own copy of every distribution, keyed by full context.
    pub table: BTreeMap<Vec<TokenId>, Vec<f64>>,
    pub vocab_size: usize,
}

fn random_probs<R: Rng>(rng: &mut R, size: usize, words: &[TokenId], quote: TokenId) -> Vec<f64> {
    let mut w = vec![0.0; size];
    for &t in words {
        let u: f64 = rng.gen();
        w[t.0 as usize] = u * u * u;
    }
    w[quote.0 as usize] = 0.15 + rng.gen::<f64>();
    // Occasionally silence a word entirely.
    if rng.gen_bool(0.3) {
        w[words[rng.gen_range(0..words.len())].0 as usize] = 0.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn paths(words: &[TokenId], max_len: usize) -> Vec<Vec<TokenId>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for p in &frontier {
            for &w in words {
                let mut q: Vec<TokenId> = p.clone();
                q.push(w);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

impl ToyWorld {
    /// `n_words` plain words plus a quote token, so the vocabulary has
    /// `n_words + 2` entries including the reserved unknown id.
    pub fn random<R: Rng>(
        rng: &mut R,
        n_words: usize,
        n_counters: usize,
        max_tokens: usize,
    ) -> Self {
        let names: Vec<String> = (0..n_words).map(|i| format!("w{i}")).collect();
        let mut tokens: Vec<&str> = names.iter().map(String::as_str).collect();
        tokens.push("\"");
        let vocab = Vocabulary::new(&tokens);
        let vocab_size = vocab.len();
        let words: Vec<TokenId> = names.iter().map(|n| vocab.id(n).unwrap()).collect();
        let quote = vocab.id("\"").unwrap();

        let mut prefixes: Vec<Vec<TokenId>> = Vec::new();
        while prefixes.len() < n_counters + 1 {
            let p: Vec<TokenId> = (0..3)
                .map(|_| words[rng.gen_range(0..words.len())])
                .collect();
            if !prefixes.contains(&p) {
                prefixes.push(p);
            }
        }

        let mut lm = TableLm::new(vocab);
        let mut table = BTreeMap::new();
        for prefix in &prefixes {
            for path in paths(&words, max_tokens.saturating_sub(1)) {
                let mut key = prefix.clone();
                key.extend(&path);
                let probs = random_probs(rng, vocab_size, &words, quote);
                lm.insert(key.clone(), Distribution::new(probs.clone()).unwrap())
                    .unwrap();
                table.insert(key, probs);
            }
        }
        ToyWorld {
            lm,
            words,
            quote,
            prefixes,
            table,
            vocab_size,
        }
    }

    fn probs(&self, prefix: &[TokenId], path: &[TokenId]) -> &[f64] {
        let mut key = prefix.to_vec();
        key.extend(path);
        &self.table[&key]
    }

    pub fn word_text(&self, t: TokenId) -> String {
        format!("w{}", t.0 - 1)
    }

    pub fn text(&self, path: &[TokenId]) -> String {
        path.iter()
            .map(|&t| self.word_text(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The distribution the next token should be drawn from after `path`.
    pub fn oracle_step(&self, path: &[TokenId], cfg: &SamplerConfig) -> Vec<f64> {
        let target = self.probs(&self.prefixes[0], path);
        let counters: Vec<&[f64]> = self.prefixes[1..]
            .iter()
            .map(|p| self.probs(p, path))
            .collect();
        let n = target.len();

        let mut w: Vec<f64> = target.to_vec();
        if !counters.is_empty() {
            for t in 0..n {
                let mut max_counter = counters[0][t];
                for c in &counters[1..] {
                    if c[t] > max_counter {
                        max_counter = c[t];
                    }
                }
                let delta = target[t] - max_counter;
                if delta < 0.0 {
                    w[t] = target[t] * (cfg.lambda * delta).exp();
                }
            }
        }
        let s: f64 = w.iter().sum();
        if s == 0.0 {
            let mut best = 0;
            for t in 0..n {
                if target[t] > target[best] {
                    best = t;
                }
            }
            w = vec![0.0; n];
            w[best] = 1.0;
        } else {
            w.iter_mut().for_each(|x| *x /= s);
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap().then(a.cmp(&b)));

        if let Some(k) = cfg.top_k {
            let mut kept = vec![0.0; n];
            for &t in order.iter().filter(|&&t| w[t] > 0.0).take(k) {
                kept[t] = w[t];
            }
            let s: f64 = kept.iter().sum();
            w = kept.iter().map(|x| x / s).collect();
            order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap().then(a.cmp(&b)));
        }

        let mut kept = vec![0.0; n];
        let mut mass = 0.0;
        for &t in &order {
            if w[t] <= 0.0 {
                break;
            }
            kept[t] = w[t];
            mass += w[t];
            if mass >= cfg.top_p - NUCLEUS_SLACK {
                break;
            }
        }
        let s: f64 = kept.iter().sum();
        kept.iter().map(|x| x / s).collect()
    }

    /// Exact probability of every outcome key; see [`outcome_key`].
    pub fn oracle_outcomes(&self, cfg: &SamplerConfig) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        self.walk(&mut Vec::new(), 1.0, cfg, &mut out);
        out
    }

    fn walk(
        &self,
        path: &mut Vec<TokenId>,
        prob: f64,
        cfg: &SamplerConfig,
        out: &mut BTreeMap<String, f64>,
    ) {
        let step = self.oracle_step(path, cfg);
        for (t, &p) in step.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let token = TokenId(t as u32);
            if token == self.quote {
                *out.entry(format!("quote|{}", self.text(path))).or_default() += prob * p;
                continue;
            }
            path.push(token);
            if path.len() == cfg.max_tokens {
                *out.entry(format!("cap|{}", self.text(path))).or_default() += prob * p;
            } else {
                self.walk(path, prob * p, cfg, out);
            }
            path.pop();
        }
    }

    /// Every generated-word path the sampler may visit, for step-level checks.
    pub fn all_paths(&self, max_tokens: usize) -> Vec<Vec<TokenId>> {
        paths(&self.words, max_tokens.saturating_sub(1))
    }
}

pub fn outcome_key(o: &GenerationOutcome) -> String {
    match o.termination {
        Termination::Quote => format!("quote|{}", o.text),
        Termination::TokenCap => format!("cap|{}", o.text),
    }
}

pub fn total_variation(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}
