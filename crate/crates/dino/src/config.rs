//! Run configuration: defaults, TOML loading and validation.
//!
//! Values are resolved as command-line flags over the config file over the
//! built-in defaults. The resolved value is echoed into every stats file.

use std::path::{Path, PathBuf};

use dino_core::pipeline::{GenerationJobSpec, PostprocessOptions};
use dino_core::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::error::DinoError;
use crate::remote::RemoteConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Explicit next-token table from a JSON file.
    Table,
    /// Word n-gram model trained on a text corpus.
    #[default]
    Ngram,
    /// HTTP logit server.
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    pub ngram_order: usize,
    pub ngram_smoothing: f64,
    pub remote: RemoteConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Ngram,
            table: None,
            corpus: None,
            ngram_order: 3,
            ngram_smoothing: 0.0,
            remote: RemoteConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    /// Instruction TOML; the built-in instruction set when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instructions: Option<PathBuf>,
    /// One first sentence per line, used in `given_x1` mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x1_file: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    /// Write per-step decoding traces.
    pub trace: bool,
    /// Not echoed, so identical runs into different directories agree.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub sampler: SamplerConfig,
    pub job: GenerationJobSpec,
    pub postprocess: PostprocessOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendConfig::default(),
            instructions: None,
            x1_file: None,
            workers: 0,
            trace: false,
            out_dir: PathBuf::from("out"),
            sampler: SamplerConfig::default(),
            job: GenerationJobSpec::default(),
            postprocess: PostprocessOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, DinoError> {
        let text = std::fs::read_to_string(path).map_err(|e| DinoError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| DinoError::format(path, e.message()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable in TOML")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config is always representable in JSON")
    }

    /// Checks value ranges. Backend files are checked when the backend is opened.
    pub fn validate(&self) -> Result<(), DinoError> {
        self.sampler
            .validate()
            .map_err(|e| DinoError::Config(e.to_string()))?;
        self.job
            .validate()
            .map_err(|e| DinoError::Config(e.to_string()))?;
        let pp = &self.postprocess;
        if !(0.0..=1.0).contains(&pp.train_fraction) {
            return Err(DinoError::Config(format!(
                "train_fraction must lie in [0, 1], got {}",
                pp.train_fraction
            )));
        }
        let b = &self.backend;
        if b.ngram_order == 0 {
            return Err(DinoError::Config("ngram_order must be at least 1".into()));
        }
        if !(b.ngram_smoothing.is_finite() && b.ngram_smoothing >= 0.0) {
            return Err(DinoError::Config(
                "ngram_smoothing must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}
