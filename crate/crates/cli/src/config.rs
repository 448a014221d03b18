use std::fs;
use std::path::{Path, PathBuf};

use fewshot_bench::designer::DesignerConfig;
use fewshot_bench::promptkit::RemoteConfig;
use fewshot_bench::sampler::SamplingConfig;
use fewshot_bench::stats::StatsConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Default locations, used when the matching command-line flag is absent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Contents of the `--config` file. Every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub sampling: SamplingConfig,
    pub stats: StatsConfig,
    pub designer: DesignerConfig,
    pub remote: RemoteConfig,
    /// 0 is quiet; 1 and above print progress to standard error.
    pub verbosity: u8,
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    /// Applies a `--seed` override to every seeded component.
    pub fn reseed(&mut self, seed: u64) {
        self.sampling.global_seed = seed;
        self.stats.bootstrap_seed = seed;
        self.designer.sim.seed = seed;
    }
}

/// Picks the flag value, else the configured path, else fails naming the flag.
pub fn resolve(
    flag: Option<PathBuf>,
    configured: &Option<PathBuf>,
    name: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| configured.clone()).ok_or_else(|| {
        CliError::Usage(format!(
            "--{name} is required (or set paths.{name} in the config file)"
        ))
    })
}
