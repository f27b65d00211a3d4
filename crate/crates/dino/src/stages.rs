//! The three pipeline stages as file-to-file steps.
//!
//! `gen-x1` writes the first-sentence pool, `gen-pairs` reads it and writes
//! raw pairs, `postprocess` reads those and writes the train/validation split.
//! [`Stages::run`] chains the three through the same files, so a full run and
//! three manual invocations produce the same bytes.

use std::path::PathBuf;

use dino_core::instructions::{InstructionSet, SimilarityLabel};
use dino_core::pipeline::{
    ingest_x1_pool, postprocess, CellSummary, DatasetStats, GenerationMode, IngestStats,
    PairsOutput, PoolStats, PostprocessReport,
};
use serde::Serialize;

use crate::backend::{open_backend, Backend};
use crate::config::RunConfig;
use crate::error::{DinoError, Status};
use crate::formats::*;
use crate::runner::Runner;
use crate::trace::TraceWriter;

#[derive(Serialize)]
struct X1Stats<'a> {
    config: serde_json::Value,
    source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pool: Option<&'a PoolStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ingest: Option<&'a IngestStats>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LabelSummary {
    pub label: Option<SimilarityLabel>,
    pub cells: usize,
    pub attempts: usize,
    pub records: usize,
    pub cap_terminated: usize,
    pub errors: usize,
    pub failed_cells: usize,
}

impl LabelSummary {
    fn add(&mut self, c: &CellSummary) {
        self.cells += 1;
        self.attempts += c.attempts;
        self.records += c.successes;
        self.cap_terminated += c.cap_terminated;
        self.errors += c.errors;
        self.failed_cells += usize::from(c.failed);
    }
}

#[derive(Serialize)]
struct PairsStats<'a> {
    config: serde_json::Value,
    x1_pool_size: usize,
    x1_ingest: &'a IngestStats,
    total: LabelSummary,
    by_label: Vec<LabelSummary>,
    /// Entry `i` counts the cells that made exactly `i` attempts.
    attempts_per_cell: Vec<usize>,
    /// Only cells that ended in a backend failure.
    failed: Vec<&'a CellSummary>,
}

#[derive(Serialize)]
struct FinalStats<'a> {
    config: serde_json::Value,
    report: &'a PostprocessReport,
    dataset: &'a DatasetStats,
}

pub fn summarize(
    output: &PairsOutput,
    labels: &[SimilarityLabel],
) -> (LabelSummary, Vec<LabelSummary>) {
    let mut total = LabelSummary::default();
    let mut by_label: Vec<LabelSummary> = labels
        .iter()
        .map(|&l| LabelSummary {
            label: Some(l),
            ..LabelSummary::default()
        })
        .collect();
    for c in &output.cells {
        total.add(c);
        if let Some(s) = by_label.iter_mut().find(|s| s.label == Some(c.label)) {
            s.add(c);
        }
    }
    (total, by_label)
}

pub struct Stages<'a> {
    cfg: &'a RunConfig,
    instructions: InstructionSet,
    runner: Runner,
    backend: Option<Backend>,
}

impl<'a> Stages<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self, DinoError> {
        cfg.validate()?;
        Ok(Stages {
            cfg,
            instructions: load_instructions(cfg.instructions.as_deref())?,
            runner: Runner::new(cfg.workers)?,
            backend: None,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn open_backend(&mut self) -> Result<(), DinoError> {
        if self.backend.is_none() {
            self.backend = Some(open_backend(&self.cfg.backend)?);
        }
        Ok(())
    }

    fn trace_writer(&self, name: &str) -> Result<Option<TraceWriter>, DinoError> {
        if !self.cfg.trace {
            return Ok(None);
        }
        std::fs::create_dir_all(&self.cfg.out_dir)
            .map_err(|e| DinoError::io(&self.cfg.out_dir, e))?;
        TraceWriter::create(&self.path(name)).map(Some)
    }

    fn given_pool(&self) -> Result<(Vec<String>, IngestStats), DinoError> {
        let path = self.cfg.x1_file.as_deref().ok_or_else(|| {
            DinoError::Config("given_x1 mode needs a first-sentence file (x1_file)".into())
        })?;
        ingest_x1_pool(&read_text(path)?, self.cfg.job.dedup_x1)
            .map_err(|e| DinoError::format(path, e))
    }

    /// Builds or ingests the first-sentence pool.
    pub fn gen_x1(&mut self) -> Result<Status, DinoError> {
        let config = self.cfg.to_json();
        if self.cfg.job.mode == GenerationMode::GivenX1 {
            let (pool, ingest) = self.given_pool()?;
            write_pool(&self.path(X1_POOL_FILE), &pool)?;
            let stats = X1Stats {
                config,
                source: "file",
                pool: None,
                ingest: Some(&ingest),
            };
            write_json(&self.path(X1_STATS_FILE), &stats)?;
            log::info!("ingested {} first sentences", pool.len());
            return Ok(Status::Success);
        }

        self.open_backend()?;
        let mut trace = self.trace_writer(X1_TRACE_FILE)?;
        let backend = self.backend.as_deref().expect("backend opened above");
        let (pool, stats) = self.runner.build_x1_pool(
            backend,
            &self.instructions,
            &self.cfg.job,
            &self.cfg.sampler,
            trace.as_mut(),
        )?;
        if let Some(t) = trace {
            t.finish()?;
        }
        write_pool(&self.path(X1_POOL_FILE), &pool)?;
        write_json(
            &self.path(X1_STATS_FILE),
            &X1Stats {
                config,
                source: "generated",
                pool: Some(&stats),
                ingest: None,
            },
        )?;
        log::info!(
            "collected {} of {} first sentences in {} attempts",
            stats.collected,
            stats.requested,
            stats.attempts
        );
        Ok(
            if pool.is_empty() && stats.errors > 0 && stats.errors == stats.attempts {
                Status::BackendFailure
            } else if stats.partial {
                log::warn!("first-sentence pool is incomplete");
                Status::Partial
            } else {
                Status::Success
            },
        )
    }

    /// Generates pairs for every pooled sentence and label.
    pub fn gen_pairs(&mut self) -> Result<Status, DinoError> {
        let (pool, ingest) = match self.cfg.job.mode {
            GenerationMode::GivenX1 => self.given_pool()?,
            GenerationMode::FromScratch => {
                let path = self.path(X1_POOL_FILE);
                ingest_x1_pool(&read_text(&path)?, self.cfg.job.dedup_x1).map_err(|e| match e {
                    dino_core::pipeline::PipelineError::EmptyPool => e.into(),
                    e => DinoError::format(&path, e),
                })?
            }
        };
        self.open_backend()?;
        let mut trace = self.trace_writer(PAIRS_TRACE_FILE)?;
        let backend = self.backend.as_deref().expect("backend opened above");
        let output = self.runner.generate_pairs(
            backend,
            &self.instructions,
            &pool,
            &self.cfg.job,
            &self.cfg.sampler,
            trace.as_mut(),
        )?;
        if let Some(t) = trace {
            t.finish()?;
        }
        write_records(&self.path(RAW_PAIRS_FILE), &output.records)?;
        let (total, by_label) = summarize(&output, &self.instructions.labels());
        let failed: Vec<&CellSummary> = output.cells.iter().filter(|c| c.failed).collect();
        let mut attempts_per_cell = vec![0; self.cfg.job.tries_per_pair + 1];
        for c in &output.cells {
            attempts_per_cell[c.attempts] += 1;
        }
        let stats = PairsStats {
            config: self.cfg.to_json(),
            x1_pool_size: pool.len(),
            x1_ingest: &ingest,
            total: total.clone(),
            by_label,
            attempts_per_cell,
            failed,
        };
        write_json(&self.path(PAIRS_STATS_FILE), &stats)?;
        log::info!(
            "{} pairs from {} cells in {} attempts",
            total.records,
            total.cells,
            total.attempts
        );
        Ok(if total.failed_cells == 0 {
            if total.records == 0 {
                log::warn!("no attempt ended in a closing quote");
            }
            Status::Success
        } else if total.failed_cells == total.cells {
            log::error!("every cell failed on the backend");
            Status::BackendFailure
        } else {
            log::warn!("{} cells failed on the backend", total.failed_cells);
            Status::Partial
        })
    }

    /// Filters, smooths, augments, shuffles and splits the raw pairs.
    pub fn postprocess(&mut self) -> Result<Status, DinoError> {
        let records = read_records(&self.path(RAW_PAIRS_FILE))?;
        let out = postprocess(records, &self.cfg.postprocess, self.cfg.sampler.seed);
        write_records(&self.path(TRAIN_FILE), &out.train)?;
        write_records(&self.path(VALIDATION_FILE), &out.validation)?;
        write_json(
            &self.path(STATS_FILE),
            &FinalStats {
                config: self.cfg.to_json(),
                report: &out.report,
                dataset: &out.stats,
            },
        )?;
        if out.report.augmentation_skipped {
            log::warn!("fewer than two distinct first sentences; no negatives added");
        }
        log::info!(
            "{} train / {} validation records",
            out.stats.train,
            out.stats.validation
        );
        Ok(Status::Success)
    }

    /// All three stages. Stops after a stage that produced nothing usable;
    /// otherwise returns the most severe status seen.
    pub fn run(&mut self) -> Result<Status, DinoError> {
        let x1 = self.gen_x1()?;
        if x1 == Status::BackendFailure {
            return Ok(x1);
        }
        if read_text(&self.path(X1_POOL_FILE))?.trim().is_empty() {
            return Ok(Status::Partial);
        }
        let pairs = self.gen_pairs()?;
        if pairs == Status::BackendFailure {
            return Ok(pairs);
        }
        self.postprocess()?;
        // Only Success and Partial remain here.
        Ok(x1.max(pairs))
    }
}
