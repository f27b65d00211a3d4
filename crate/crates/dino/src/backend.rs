use dino_core::{train_ngram, LanguageModel};

use crate::config::{BackendConfig, BackendKind};
use crate::error::DinoError;
use crate::formats::{load_table, read_text};
use crate::remote::RemoteLm;

/// Any backend the runner can drive from several threads.
pub type Backend = Box<dyn LanguageModel + Send + Sync>;

pub fn open_backend(cfg: &BackendConfig) -> Result<Backend, DinoError> {
    let missing = |what: &str| DinoError::Config(format!("the {what} backend needs a file path"));
    match cfg.kind {
        BackendKind::Table => {
            let path = cfg.table.as_deref().ok_or_else(|| missing("table"))?;
            Ok(Box::new(load_table(path)?))
        }
        BackendKind::Ngram => {
            let path = cfg.corpus.as_deref().ok_or_else(|| missing("ngram"))?;
            let lm = train_ngram(&read_text(path)?, cfg.ngram_order, cfg.ngram_smoothing)
                .map_err(|e| DinoError::format(path, e))?;
            log::info!(
                "trained {}-gram model over {} tokens",
                cfg.ngram_order,
                lm.vocab_size()
            );
            Ok(Box::new(lm))
        }
        BackendKind::Remote => {
            let lm = RemoteLm::connect(cfg.remote.clone())?;
            log::info!(
                "connected to {} ({}, {} tokens)",
                cfg.remote.endpoint,
                lm.model_id(),
                lm.vocab_size()
            );
            Ok(Box::new(lm))
        }
    }
}
