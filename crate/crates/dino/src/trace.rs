use dino_core::instructions::SimilarityLabel;
use dino_core::sampler::{StepTrace, TraceSink};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    X1,
    Pairs,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    x1_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<SimilarityLabel>,
    attempt: usize,
    #[serde(flatten)]
    step: &'a StepTrace,
}

/// Buffers one JSON line per decoding step for a single job.
#[derive(Debug)]
pub struct TraceBuffer {
    stage: Stage,
    x1_index: Option<usize>,
    label: Option<SimilarityLabel>,
    attempt: usize,
    pub lines: Vec<String>,
}

impl TraceBuffer {
    pub fn for_seed(attempt: usize) -> Self {
        TraceBuffer {
            stage: Stage::X1,
            x1_index: None,
            label: None,
            attempt,
            lines: Vec::new(),
        }
    }

    pub fn for_cell(x1_index: usize, label: SimilarityLabel) -> Self {
        TraceBuffer {
            stage: Stage::Pairs,
            x1_index: Some(x1_index),
            label: Some(label),
            attempt: 0,
            lines: Vec::new(),
        }
    }
}

impl TraceSink for TraceBuffer {
    fn begin_attempt(&mut self, attempt: usize) {
        self.attempt = attempt;
    }

    fn record(&mut self, step: &StepTrace) {
        let line = TraceLine {
            stage: self.stage,
            x1_index: self.x1_index,
            label: self.label,
            attempt: self.attempt,
            step,
        };
        self.lines
            .push(serde_json::to_string(&line).expect("trace lines serialize"));
    }
}

/// Appends trace lines to a JSON Lines file.
pub struct TraceWriter {
    path: std::path::PathBuf,
    out: std::io::BufWriter<std::fs::File>,
}

impl TraceWriter {
    pub fn create(path: &std::path::Path) -> Result<Self, crate::DinoError> {
        let file = std::fs::File::create(path).map_err(|e| crate::DinoError::io(path, e))?;
        Ok(TraceWriter {
            path: path.to_path_buf(),
            out: std::io::BufWriter::new(file),
        })
    }

    pub fn write_lines(&mut self, lines: &[String]) -> Result<(), crate::DinoError> {
        use std::io::Write;
        lines
            .iter()
            .try_for_each(|l| writeln!(self.out, "{l}"))
            .map_err(|e| crate::DinoError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), crate::DinoError> {
        use std::io::Write;
        self.out
            .flush()
            .map_err(|e| crate::DinoError::io(&self.path, e))
    }
}
