use std::path::PathBuf;

use fewshot_bench::corpus::CorpusError;
use fewshot_bench::designer::DesignError;
use fewshot_bench::promptkit::PromptError;
use fewshot_bench::promptkit::RemoteError;
use fewshot_bench::sampler::{ManifestError, SamplerError};
use fewshot_bench::stats::StatsError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: invalid config: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(
        "manifest verification failed: {failed} of {total} episode(s) differ, checksum {checksum}"
    )]
    VerifyFailed {
        failed: usize,
        total: usize,
        checksum: &'static str,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Corpus(_) => "corpus",
            CliError::Sampler(_) => "sampler",
            CliError::Manifest(ManifestError::ChecksumMismatch { .. }) => "checksum_mismatch",
            CliError::Manifest(_) => "manifest",
            CliError::Stats(StatsError::ChecksumMismatch { .. }) => "checksum_mismatch",
            CliError::Stats(_) => "stats",
            CliError::Design(_) => "design",
            CliError::Prompt(_) => "prompt",
            CliError::Remote(_) => "remote",
            CliError::Io { .. } => "io",
            CliError::Config { .. } => "config",
            CliError::Usage(_) => "usage",
            CliError::VerifyFailed { .. } => "verification_failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// One line of JSON: `{"error":{"kind":…,"message":…}}`.
    pub fn to_json_line(&self) -> String {
        json!({"error": {"kind": self.kind(), "message": self.to_string()}}).to_string()
    }
}
