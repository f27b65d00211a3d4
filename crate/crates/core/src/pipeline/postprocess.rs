use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{postprocess_seed, JobRng, PairRecord, Provenance};

/// Score of a random-negative pair.
pub const AUGMENTED_SCORE: f64 = 0.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessOptions {
    /// Drop generated pairs whose two sentences are identical.
    pub remove_identical: bool,
    /// Map generated scores 0 -> 0.1 and 1 -> 0.9.
    pub smoothing: bool,
    /// Add random-negative pairs for each first sentence.
    pub augmentation: bool,
    pub augment_per_x1: usize,
    pub shuffle: bool,
    pub train_fraction: f64,
}

impl Default for PostprocessOptions {
    fn default() -> Self {
        PostprocessOptions {
            remove_identical: true,
            smoothing: true,
            augmentation: true,
            augment_per_x1: 2,
            shuffle: true,
            train_fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PostprocessReport {
    pub input: usize,
    pub identical_removed: usize,
    pub smoothed: usize,
    pub distinct_x1: usize,
    pub augmented: usize,
    /// Augmentation was requested but fewer than two distinct first sentences survived.
    pub augmentation_skipped: bool,
    /// First sentences for which no other entry offered a negative.
    pub x1_without_negatives: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PostprocessOutput {
    pub train: Vec<PairRecord>,
    pub validation: Vec<PairRecord>,
    pub report: PostprocessReport,
    pub stats: DatasetStats,
}

fn smooth(score: f64) -> f64 {
    if score == 0.0 {
        0.1
    } else if score == 1.0 {
        0.9
    } else {
        score
    }
}

/// Filters identical pairs, smooths labels, adds random negatives, then
/// shuffles and splits, in that order. Each stage can be switched off.
pub fn postprocess(
    records: Vec<PairRecord>,
    options: &PostprocessOptions,
    master_seed: u64,
) -> PostprocessOutput {
    let mut rng = JobRng::seed_from_u64(postprocess_seed(master_seed));
    let mut report = PostprocessReport {
        input: records.len(),
        ..PostprocessReport::default()
    };

    let mut kept: Vec<PairRecord> = Vec::with_capacity(records.len());
    for mut r in records {
        if r.provenance == Provenance::Generated {
            if options.remove_identical && r.text_a.trim() == r.text_b.trim() {
                report.identical_removed += 1;
                continue;
            }
            if options.smoothing {
                let smoothed = smooth(r.score);
                if smoothed != r.score {
                    report.smoothed += 1;
                }
                r.score = smoothed;
            }
        }
        kept.push(r);
    }

    let mut first_sentences: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for r in kept
        .iter()
        .filter(|r| r.provenance == Provenance::Generated)
    {
        if seen.insert(r.text_a.as_str()) {
            first_sentences.push(r.text_a.as_str());
        }
    }
    report.distinct_x1 = first_sentences.len();

    let mut augmented = Vec::new();
    if options.augmentation && options.augment_per_x1 > 0 {
        if first_sentences.len() < 2 {
            report.augmentation_skipped = true;
        } else {
            let generated: Vec<&PairRecord> = kept
                .iter()
                .filter(|r| r.provenance == Provenance::Generated)
                .collect();
            for &x1 in &first_sentences {
                let negatives: Vec<&str> = generated
                    .iter()
                    .filter(|r| r.text_a != x1 && r.text_b != x1)
                    .map(|r| r.text_b.as_str())
                    .collect();
                if negatives.is_empty() {
                    report.x1_without_negatives += 1;
                    continue;
                }
                for _ in 0..options.augment_per_x1 {
                    let x2 = negatives[rng.gen_range(0..negatives.len())];
                    augmented.push(PairRecord {
                        text_a: x1.into(),
                        text_b: x2.into(),
                        score: AUGMENTED_SCORE,
                        seed_label: None,
                        provenance: Provenance::Augmented,
                    });
                }
            }
        }
    }
    report.augmented = augmented.len();
    kept.extend(augmented);

    if options.shuffle {
        kept.shuffle(&mut rng);
    }
    let n_train = train_size(kept.len(), options.train_fraction);
    let validation = kept.split_off(n_train);
    let stats = compute_stats(&kept, &validation);
    PostprocessOutput {
        train: kept,
        validation,
        report,
        stats,
    }
}

/// `round(fraction * total)`, clamped to `[0, total]`.
pub fn train_size(total: usize, fraction: f64) -> usize {
    let n = libm::round(fraction.clamp(0.0, 1.0) * total as f64) as usize;
    n.min(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreCount {
    pub score: f64,
    pub provenance: Provenance,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub train: usize,
    pub validation: usize,
    pub generated: usize,
    pub augmented: usize,
    /// Record counts per (score, provenance), ordered by score then provenance.
    pub by_score: Vec<ScoreCount>,
}

pub fn compute_stats(train: &[PairRecord], validation: &[PairRecord]) -> DatasetStats {
    let mut stats = DatasetStats {
        total: train.len() + validation.len(),
        train: train.len(),
        validation: validation.len(),
        ..DatasetStats::default()
    };
    for r in train.iter().chain(validation) {
        match r.provenance {
            Provenance::Generated => stats.generated += 1,
            Provenance::Augmented => stats.augmented += 1,
        }
        match stats
            .by_score
            .iter_mut()
            .find(|c| c.score.to_bits() == r.score.to_bits() && c.provenance == r.provenance)
        {
            Some(c) => c.count += 1,
            None => stats.by_score.push(ScoreCount {
                score: r.score,
                provenance: r.provenance,
                count: 1,
            }),
        }
    }
    stats.by_score.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then((a.provenance as u8).cmp(&(b.provenance as u8)))
    });
    stats
}
