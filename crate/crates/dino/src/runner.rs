//! Parallel execution of the generation stages.
//!
//! Work is split into independent jobs whose random generators are derived
//! from the master seed and the job position, and results are merged in job
//! order. Output therefore does not depend on the number of workers.

use dino_core::instructions::InstructionSet;
use dino_core::pipeline::{
    cell_jobs, run_cell, seed_attempt, seed_prompt, GenerationJobSpec, PairsOutput, PipelineError,
    PoolBuilder, PoolStats,
};
use dino_core::sampler::TraceSink;
use dino_core::{LanguageModel, SamplerConfig};
use rayon::prelude::*;

use crate::error::DinoError;
use crate::trace::{TraceBuffer, TraceWriter};

/// Cells handed to the thread pool per round, per worker.
const CELLS_PER_WORKER: usize = 64;

fn sink(buf: &mut Option<TraceBuffer>) -> Option<&mut dyn TraceSink> {
    buf.as_mut().map(|b| b as &mut dyn TraceSink)
}

pub struct Runner {
    threads: rayon::ThreadPool,
}

impl Runner {
    /// `workers == 0` uses one thread per core.
    pub fn new(workers: usize) -> Result<Self, DinoError> {
        let threads = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| DinoError::Config(format!("cannot start worker threads: {e}")))?;
        Ok(Runner { threads })
    }

    pub fn workers(&self) -> usize {
        self.threads.current_num_threads()
    }

    /// Same result as the sequential pool builder: attempts run in parallel
    /// batches but are offered to the pool strictly in attempt order.
    pub fn build_x1_pool<M: LanguageModel + Sync + ?Sized>(
        &self,
        backend: &M,
        instructions: &InstructionSet,
        spec: &GenerationJobSpec,
        cfg: &SamplerConfig,
        mut trace: Option<&mut TraceWriter>,
    ) -> Result<(Vec<String>, PoolStats), DinoError> {
        cfg.validate().map_err(PipelineError::from)?;
        let mut builder = PoolBuilder::new(spec.x1_count, spec.dedup_x1)?;
        let prompt = seed_prompt(backend, instructions, spec)?;
        let tracing = trace.is_some();
        let workers = self.workers();
        while !builder.is_done() {
            let start = builder.attempts();
            let wanted = 2 * (spec.x1_count - builder.collected());
            let batch = wanted.clamp(workers, 8 * workers);
            let end = (start + batch).min(builder.max_attempts());
            let results: Vec<_> = self.threads.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|attempt| {
                        let mut buf = tracing.then(|| TraceBuffer::for_seed(attempt));
                        let result = seed_attempt(backend, &prompt, cfg, attempt, sink(&mut buf));
                        (result, buf)
                    })
                    .collect()
            });
            for (result, buf) in results {
                if builder.is_done() {
                    break;
                }
                builder.offer(result)?;
                if let (Some(w), Some(b)) = (trace.as_deref_mut(), buf) {
                    w.write_lines(&b.lines)?;
                }
            }
            log::debug!(
                "seed attempts {} of at most {}",
                builder.attempts(),
                builder.max_attempts()
            );
        }
        Ok(builder.finish())
    }

    /// Runs every (sentence, label) cell; results are concatenated in cell order.
    pub fn generate_pairs<M: LanguageModel + Sync + ?Sized>(
        &self,
        backend: &M,
        instructions: &InstructionSet,
        pool: &[String],
        spec: &GenerationJobSpec,
        cfg: &SamplerConfig,
        mut trace: Option<&mut TraceWriter>,
    ) -> Result<PairsOutput, DinoError> {
        spec.validate()?;
        cfg.validate().map_err(PipelineError::from)?;
        if pool.is_empty() {
            return Err(PipelineError::EmptyPool.into());
        }
        let labels = instructions.labels();
        let jobs = cell_jobs(pool, &labels);
        let tracing = trace.is_some();
        let mut output = PairsOutput::default();
        for (round, chunk) in jobs.chunks(CELLS_PER_WORKER * self.workers()).enumerate() {
            let results: Vec<_> = self.threads.install(|| {
                chunk
                    .par_iter()
                    .map(|job| {
                        let mut buf =
                            tracing.then(|| TraceBuffer::for_cell(job.x1_index, job.label));
                        run_cell(backend, instructions, job, spec, cfg, sink(&mut buf))
                            .map(|r| (r, buf))
                    })
                    .collect()
            });
            for result in results {
                let (cell, buf) = result?;
                if let (Some(w), Some(b)) = (trace.as_deref_mut(), buf) {
                    w.write_lines(&b.lines)?;
                }
                output.records.extend(cell.records);
                output.cells.push(cell.summary);
            }
            log::info!(
                "cells done: {} of {} ({} pairs), round {}",
                output.cells.len(),
                jobs.len(),
                output.records.len(),
                round + 1
            );
        }
        Ok(output)
    }
}
