use std::path::{Path, PathBuf};
use std::time::Duration;

use madacc::backend::{LiveConfig, DEFAULT_API_KEY_ENV};
use madacc::corpus::ContextWindow;
use madacc::protocol::DebateConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which backend a run talks to. Exactly one kind is active per config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Live {
        endpoint_url: String,
        #[serde(default = "default_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout_secs")]
        request_timeout_secs: u64,
    },
    Mock {
        mock_script_path: PathBuf,
    },
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_parallelism() -> usize {
    1
}

/// Experiment description loaded from a TOML file. Relative paths resolve
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub split_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit_rpm: Option<usize>,
    #[serde(default)]
    pub context: ContextWindow,
    pub backend: BackendConfig,
    #[serde(default)]
    pub debate: DebateConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // absolute, so the snapshot written into a run directory still works
        let base = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let base = std::path::absolute(base).map_err(|source| CliError::Io {
            path: base.to_path_buf(),
            source,
        })?;
        config.resolve_paths(&base);
        config.validate().map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.corpus_dir);
        join(&mut self.split_file);
        join(&mut self.output_dir);
        if let Some(p) = &mut self.templates_dir {
            join(p);
        }
        if let Some(p) = &mut self.cache_dir {
            join(p);
        }
        if let BackendConfig::Mock { mock_script_path } = &mut self.backend {
            join(mock_script_path);
        }
    }

    /// Checks everything that can be checked before a run starts.
    pub fn validate(&self) -> Result<(), String> {
        let must_exist = |what: &str, p: &Path, dir: bool| {
            let ok = if dir { p.is_dir() } else { p.is_file() };
            if ok {
                Ok(())
            } else {
                Err(format!("{what} not found: {}", p.display()))
            }
        };
        must_exist("corpus_dir", &self.corpus_dir, true)?;
        must_exist("split_file", &self.split_file, false)?;
        if let Some(p) = &self.templates_dir {
            must_exist("templates_dir", p, true)?;
        }
        if let BackendConfig::Mock { mock_script_path } = &self.backend {
            must_exist("mock_script_path", mock_script_path, false)?;
        }
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        if self.rate_limit_rpm == Some(0) {
            return Err("rate_limit_rpm must be positive when set".into());
        }
        self.debate.validate().map_err(|e| e.to_string())
    }

    /// Command-line overrides; flags win over the file.
    pub fn apply_overrides(&mut self, seed: Option<u64>, parallelism: Option<usize>) -> Result<(), String> {
        if let Some(seed) = seed {
            self.debate.rng_seed = seed;
        }
        if let Some(p) = parallelism {
            if p == 0 {
                return Err("--parallelism must be at least 1".into());
            }
            self.parallelism = p;
        }
        Ok(())
    }

    pub fn live_config(&self) -> Option<LiveConfig> {
        match &self.backend {
            BackendConfig::Live {
                endpoint_url,
                api_key_env,
                request_timeout_secs,
            } => {
                let mut live = LiveConfig::new(endpoint_url.clone());
                live.api_key_env = api_key_env.clone();
                live.request_timeout = Duration::from_secs(*request_timeout_secs);
                live.rate_limit_rpm = self.rate_limit_rpm;
                Some(live)
            }
            BackendConfig::Mock { .. } => None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
