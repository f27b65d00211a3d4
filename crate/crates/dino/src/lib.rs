//! File formats, backends, parallel execution and the command-line front end
//! for `dino-core`.

pub mod backend;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod remote;
pub mod runner;
pub mod stages;
pub mod trace;

pub use backend::{open_backend, Backend};
pub use config::{BackendConfig, BackendKind, RunConfig};
pub use error::{DinoError, Status};
pub use remote::{RemoteConfig, RemoteLm};
pub use runner::Runner;
pub use stages::Stages;
