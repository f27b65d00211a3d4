mod common;

use std::collections::BTreeMap;

use common::oracle::{outcome_key, total_variation, ToyWorld};
use dino_core::sampler::{decode_step, generate_continuation, SamplerConfig};
use dino_core::LmContext;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn contexts(world: &ToyWorld, path: &[dino_core::TokenId]) -> (LmContext, Vec<LmContext>) {
    let mk = |prefix: &Vec<dino_core::TokenId>| {
        let mut c = LmContext::new(prefix.clone());
        for &t in path {
            c.push(t);
        }
        c
    };
    (
        mk(&world.prefixes[0]),
        world.prefixes[1..].iter().map(mk).collect(),
    )
}

#[test]
fn step_distributions_match_oracle_on_every_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..40 {
        let n_words = 2 + case % 3;
        let n_counters = case % 3;
        let max_tokens = 1 + case % 4;
        let world = ToyWorld::random(&mut rng, n_words, n_counters, max_tokens);
        for lambda in [0.0, 10.0, 100.0] {
            for top_k in [None, Some(1), Some(2), Some(5)] {
                let cfg = SamplerConfig {
                    lambda,
                    top_k,
                    top_p: 0.8,
                    max_tokens,
                    ..Default::default()
                };
                for path in world.all_paths(max_tokens) {
                    let (target, counters) = contexts(&world, &path);
                    let got = decode_step(&world.lm, &target, &counters, &cfg).unwrap();
                    let want = world.oracle_step(&path, &cfg);
                    for (g, w) in got.sampling.probs().iter().zip(&want) {
                        assert!(
                            (g - w).abs() < 1e-12,
                            "case {case} lambda {lambda} path {path:?}: {g} vs {w}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn three_token_model_matches_path_enumeration() {
    // Two words plus the quote: vocabulary {<unk>, w0, w1, "}.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let world = ToyWorld::random(&mut rng, 2, 1, 3);
    for lambda in [0.0, 100.0] {
        let cfg = SamplerConfig {
            lambda,
            max_tokens: 3,
            ..Default::default()
        };
        let exact = world.oracle_outcomes(&cfg);
        let total: f64 = exact.values().sum();
        assert!((total - 1.0).abs() < 1e-12);

        let runs = 200_000;
        let mut sampler_rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        for _ in 0..runs {
            let (target, counters) = contexts(&world, &[]);
            let out =
                generate_continuation(&world.lm, target, counters, &cfg, &mut sampler_rng, None)
                    .unwrap();
            *counts.entry(outcome_key(&out)).or_default() += 1.0 / runs as f64;
        }
        let tv = total_variation(&exact, &counts);
        assert!(tv < 0.01, "lambda {lambda}: total variation {tv}");
    }
}
