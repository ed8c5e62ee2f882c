//! Command-line driver: configuration, run store and transcript inspector.

pub mod commands;
pub mod config;
pub mod inspect;

use std::path::PathBuf;

pub use commands::{
    cmd_evaluate, cmd_inspect, cmd_prepare, cmd_run, EvaluateOutcome, Method, PrepareOutcome, RunOptions,
    RunOutcome,
};
pub use config::{BackendConfig, RunConfig};
pub use inspect::format_trace;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("instances file {} not found; run `madacc prepare` first", .0.display())]
    NotPrepared(PathBuf),
    #[error("no record for instance `{id}` in {}", path.display())]
    UnknownInstanceId { id: String, path: PathBuf },
    #[error("no debate run found under {}; pass --records", .0.display())]
    NoRecords(PathBuf),
    #[error(transparent)]
    Corpus(#[from] madacc::corpus::CorpusError),
    #[error(transparent)]
    Jsonl(#[from] madacc::jsonl::JsonlError),
    #[error(transparent)]
    Protocol(#[from] madacc::protocol::ProtocolError),
    #[error(transparent)]
    Backend(#[from] madacc::backend::BackendError),
    #[error(transparent)]
    Template(#[from] madacc::agents::TemplateError),
    #[error(transparent)]
    Metrics(#[from] madacc::metrics::MetricsError),
}
