#![allow(dead_code)]

pub mod stub;

use std::path::Path;
use std::process::{Command, Output};

use dino_core::instructions::SimilarityLabel;
use dino_core::{Distribution, TableLm, Vocabulary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dino(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dino"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn dino_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    let d = dir.to_str().unwrap();
    all.extend(["--out-dir", d]);
    dino(&all)
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SUBJECTS: [&str; 8] = [
    "a man",
    "a woman",
    "the dog",
    "two children",
    "a chef",
    "the old man",
    "a girl",
    "the team",
];
const VERBS: [&str; 7] = [
    "is playing",
    "plays",
    "is cooking",
    "is riding",
    "rides",
    "watches",
    "is eating",
];
const OBJECTS: [&str; 8] = [
    "a guitar",
    "the piano",
    "a horse",
    "pasta",
    "a bike",
    "the ball",
    "some soup",
    "a movie",
];
const PLACES: [&str; 5] = [
    "in the park",
    "at home",
    "on the street",
    "near the river",
    "today",
];

fn sentence(rng: &mut ChaCha8Rng, subject: &str, verb: &str) -> String {
    let object = OBJECTS.choose(rng).unwrap();
    if rng.gen_bool(0.5) {
        format!("{subject} {verb} {object} .")
    } else {
        format!(
            "{subject} {verb} {object} {} .",
            PLACES.choose(rng).unwrap()
        )
    }
}

/// Instruction-formatted text pairs, one block per pair, about `bytes` long.
pub fn synthetic_corpus(seed: u64, bytes: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    while out.len() < bytes {
        let subject = *SUBJECTS.choose(&mut rng).unwrap();
        let verb = *VERBS.choose(&mut rng).unwrap();
        let x1 = sentence(&mut rng, subject, verb);
        let label = *SimilarityLabel::ALL.choose(&mut rng).unwrap();
        let x2 = match label {
            SimilarityLabel::Same => x1.replace(" is ", " is now "),
            SimilarityLabel::Similar => sentence(&mut rng, subject, verb),
            SimilarityLabel::Different => {
                let s = *SUBJECTS.choose(&mut rng).unwrap();
                let v = *VERBS.choose(&mut rng).unwrap();
                sentence(&mut rng, s, v)
            }
        };
        out.push_str(&format!(
            "Task: Write two sentences that {}.\nSentence 1: \"{x1}\"\nSentence 2: \"{x2}\"\n\n",
            label.default_phrase()
        ));
    }
    out
}

/// Words `A`, `B` and the quote; the next token is always `A` or `B`.
pub fn never_quote_table() -> TableLm {
    let vocab = Vocabulary::new(["A", "B", "\""]);
    TableLm::new(vocab)
        .with(vec![], Distribution::new(vec![0.0, 0.5, 0.5, 0.0]).unwrap())
        .unwrap()
}

pub fn never_quote_spec() -> &'static str {
    r#"{"vocab": ["A", "B", "\""], "transitions": [{"context": [], "next": {"A": 0.5, "B": 0.5}}]}"#
}

/// Emits `A B` then a quote whatever the prompt.
pub fn fixed_sentence_spec() -> &'static str {
    r#"{"vocab": ["A", "B", "\""], "transitions": [
        {"context": [], "next": {"A": 1.0}},
        {"context": ["A"], "next": {"B": 1.0}},
        {"context": ["B"], "next": {"\"": 1.0}}
    ]}"#
}

/// A small model that produces a variety of short quoted sentences.
pub fn chatty_spec() -> &'static str {
    r#"{"vocab": ["A", "B", "C", ".", "\""], "transitions": [
        {"context": [], "next": {"A": 0.4, "B": 0.3, "C": 0.3}},
        {"context": ["A"], "next": {"B": 0.3, "C": 0.3, ".": 0.2, "\"": 0.2}},
        {"context": ["B"], "next": {"A": 0.3, "C": 0.2, ".": 0.2, "\"": 0.3}},
        {"context": ["C"], "next": {"A": 0.3, "B": 0.3, "\"": 0.4}},
        {"context": ["."], "next": {"\"": 1.0}}
    ]}"#
}

pub fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

pub fn read_dir_files(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}
