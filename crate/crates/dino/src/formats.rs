//! On-disk formats.
//!
//! * pair datasets: JSON Lines, one [`PairRecord`] per line
//! * first-sentence pools: plain text, one sentence per line
//! * stats: pretty-printed JSON
//! * table models: JSON [`TableSpec`]
//! * instruction sets: TOML [`InstructionConfig`]
//!
//! Output files are written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dino_core::instructions::{InstructionConfig, InstructionSet};
use dino_core::pipeline::PairRecord;
use dino_core::{TableLm, TableSpec};
use serde::Serialize;

use crate::error::DinoError;

pub const X1_POOL_FILE: &str = "x1_pool.txt";
pub const RAW_PAIRS_FILE: &str = "raw_pairs.jsonl";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const VALIDATION_FILE: &str = "validation.jsonl";
pub const X1_STATS_FILE: &str = "x1_stats.json";
pub const PAIRS_STATS_FILE: &str = "pairs_stats.json";
pub const STATS_FILE: &str = "stats.json";
pub const X1_TRACE_FILE: &str = "x1_trace.jsonl";
pub const PAIRS_TRACE_FILE: &str = "pairs_trace.jsonl";

pub fn read_text(path: &Path) -> Result<String, DinoError> {
    fs::read_to_string(path).map_err(|e| DinoError::io(path, e))
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes through `fill` into a temporary file, then renames it over `path`.
pub fn write_atomically(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), DinoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DinoError::io(dir, e))?;
    }
    let tmp = temp_path(path);
    let result = (|| {
        let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut out)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()
    })();
    result.and_then(|()| fs::rename(&tmp, path)).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        DinoError::io(path, e)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DinoError> {
    write_atomically(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

pub fn write_records(path: &Path, records: &[PairRecord]) -> Result<(), DinoError> {
    write_atomically(path, |w| {
        for r in records {
            serde_json::to_writer(&mut *w, r)?;
            writeln!(w)?;
        }
        Ok(())
    })
}

pub fn parse_records(text: &str) -> Result<Vec<PairRecord>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<PairRecord>, DinoError> {
    parse_records(&read_text(path)?)
        .map_err(|(line, msg)| DinoError::format(path, format!("line {line}: {msg}")))
}

pub fn write_pool(path: &Path, pool: &[String]) -> Result<(), DinoError> {
    write_atomically(path, |w| {
        for s in pool {
            writeln!(w, "{s}")?;
        }
        Ok(())
    })
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<(), DinoError> {
    write_pool(path, lines)
}

pub fn load_table(path: &Path) -> Result<TableLm, DinoError> {
    let spec: TableSpec =
        serde_json::from_str(&read_text(path)?).map_err(|e| DinoError::format(path, e))?;
    TableLm::from_spec(&spec).map_err(|e| DinoError::format(path, e))
}

pub fn parse_instructions(text: &str) -> Result<InstructionSet, String> {
    let config: InstructionConfig = toml::from_str(text).map_err(|e| e.message().to_string())?;
    InstructionSet::from_config(&config).map_err(|e| e.to_string())
}

pub fn load_instructions(path: Option<&Path>) -> Result<InstructionSet, DinoError> {
    match path {
        None => Ok(InstructionSet::default()),
        Some(p) => parse_instructions(&read_text(p)?).map_err(|e| DinoError::format(p, e)),
    }
}
