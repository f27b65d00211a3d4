use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dino_core::pipeline::GenerationMode;

use crate::config::{BackendKind, RunConfig};
use crate::error::{DinoError, Status};
use crate::stages::Stages;

#[derive(Debug, Parser)]
#[command(
    name = "dino",
    version,
    about = "Generate labeled sentence-pair datasets from a language model"
)]
pub struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or ingest) the pool of first sentences.
    GenX1(RunArgs),
    /// Generate sentence pairs for every pooled sentence and label.
    GenPairs(RunArgs),
    /// Filter, smooth, augment and split the generated pairs.
    Postprocess(RunArgs),
    /// All three stages in sequence.
    Run(RunArgs),
    /// Print the resolved configuration as TOML.
    ShowConfig(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    GivenX1,
    FromScratch,
}

impl From<ModeArg> for GenerationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::GivenX1 => GenerationMode::GivenX1,
            ModeArg::FromScratch => GenerationMode::FromScratch,
        }
    }
}

/// Every flag overrides the matching config-file entry.
#[derive(Clone, Debug, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// JSON next-token table for the table backend.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Training text for the ngram backend.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub ngram_order: Option<usize>,
    #[arg(long)]
    pub ngram_smoothing: Option<f64>,
    /// Base URL of the logit server for the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Instruction TOML replacing the built-in instructions.
    #[arg(long)]
    pub instructions: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// One first sentence per line (given-x1 mode).
    #[arg(long)]
    pub x1_file: Option<PathBuf>,
    #[arg(long)]
    pub x1_count: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    /// 0 disables top-k truncation.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub pairs_per_label: Option<usize>,
    /// Attempts per (sentence, label) cell.
    #[arg(long)]
    pub tries: Option<usize>,
    #[arg(long)]
    pub no_smoothing: bool,
    #[arg(long)]
    pub no_augmentation: bool,
    #[arg(long)]
    pub no_dedup: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write per-step decoding traces as JSON Lines.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl RunArgs {
    /// Flags over the config file over defaults.
    pub fn resolve(&self) -> Result<RunConfig, DinoError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let b = &mut cfg.backend;
        set(&mut b.kind, self.backend);
        set_some(&mut b.table, &self.table);
        set_some(&mut b.corpus, &self.corpus);
        set(&mut b.ngram_order, self.ngram_order);
        set(&mut b.ngram_smoothing, self.ngram_smoothing);
        set(&mut b.remote.endpoint, self.endpoint.clone());
        set(&mut b.remote.max_retries, self.max_retries);
        set_some(&mut cfg.instructions, &self.instructions);
        set_some(&mut cfg.x1_file, &self.x1_file);
        set(&mut cfg.job.mode, self.mode.map(Into::into));
        set(&mut cfg.job.x1_count, self.x1_count);
        set(&mut cfg.job.pairs_per_label, self.pairs_per_label);
        set(&mut cfg.job.tries_per_pair, self.tries);
        set(&mut cfg.sampler.lambda, self.lambda);
        set(&mut cfg.sampler.top_p, self.top_p);
        set(
            &mut cfg.sampler.top_k,
            self.top_k.map(|k| (k > 0).then_some(k)),
        );
        set(&mut cfg.sampler.max_tokens, self.max_tokens);
        set(&mut cfg.sampler.seed, self.seed);
        set(&mut cfg.workers, self.workers);
        set(&mut cfg.out_dir, self.out_dir.clone());
        cfg.postprocess.smoothing &= !self.no_smoothing;
        cfg.postprocess.augmentation &= !self.no_augmentation;
        cfg.job.dedup_x1 &= !self.no_dedup;
        cfg.trace |= self.trace;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_some<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

/// Executes a parsed command line and maps the result to an exit status.
pub fn execute(command: &Command) -> Status {
    let result = (|| match command {
        Command::ShowConfig(args) => {
            print!("{}", args.resolve()?.to_toml());
            Ok(Status::Success)
        }
        Command::GenX1(a) => Stages::new(&a.resolve()?)?.gen_x1(),
        Command::GenPairs(a) => Stages::new(&a.resolve()?)?.gen_pairs(),
        Command::Postprocess(a) => Stages::new(&a.resolve()?)?.postprocess(),
        Command::Run(a) => Stages::new(&a.resolve()?)?.run(),
    })();
    match result {
        Ok(status) => status,
        Err(e) => {
            log::error!("{e}");
            e.status()
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, _) => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    execute(&cli.command).into()
}
