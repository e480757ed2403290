//! Config file loading and flag resolution. Flags win over the file, the
//! file wins over built-in defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::Args;
use cookworld::policy::{BackendConfig, BackendKind};
use serde::Deserialize;

/// Keys accepted in a `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub timeout: Option<f64>,
    pub retries: Option<u32>,
    pub api_key_env: Option<String>,
    pub script: Option<PathBuf>,
    pub replay_from: Option<PathBuf>,
    pub char_budget: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub random_seed: Option<u64>,
    pub workers: Option<usize>,
    pub run_dir: Option<PathBuf>,
    pub tips: Option<String>,
    pub max_trials: Option<u32>,
    pub scenario: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.script, &mut config.replay_from, &mut config.run_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// remote_chat, expert, replay, random_valid, scripted or human_repl
    #[arg(long)]
    pub backend: Option<String>,
    /// Chat-completion URL (remote_chat)
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent with each request (remote_chat)
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Per-attempt timeout in seconds
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Retries after the first attempt
    #[arg(long)]
    pub retries: Option<u32>,
    /// Environment variable holding the API key
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// JSON array of replies (scripted)
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Trajectory whose actions are re-issued (replay)
    #[arg(long)]
    pub replay_from: Option<PathBuf>,
    /// Prompt size in characters before old turns are dropped
    #[arg(long)]
    pub char_budget: Option<usize>,
    /// Concurrent remote requests
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Seed for the random_valid backend
    #[arg(long)]
    pub random_seed: Option<u64>,
}

impl BackendArgs {
    pub fn resolve(&self, file: &FileConfig, default: BackendKind) -> anyhow::Result<BackendConfig> {
        let kind = match self.backend.as_ref().or(file.backend.as_ref()) {
            Some(name) => match BackendKind::from_name(name) {
                Some(kind) => kind,
                None => bail!(
                    "unknown backend {name:?} (expected remote_chat, expert, replay, random_valid, scripted or human_repl)"
                ),
            },
            None => default,
        };
        let mut c = BackendConfig::new(kind);
        c.endpoint = self.endpoint.clone().or_else(|| file.endpoint.clone());
        c.model_name = self.model.clone().or_else(|| file.model.clone());
        if let Some(t) = self.temperature.or(file.temperature) {
            c.temperature = t;
        }
        if let Some(secs) = self.timeout.or(file.timeout) {
            c.timeout = Duration::try_from_secs_f64(secs).context("--timeout must be a positive number of seconds")?;
        }
        if let Some(r) = self.retries.or(file.retries) {
            c.max_retries = r;
        }
        if let Some(v) = self.api_key_env.clone().or_else(|| file.api_key_env.clone()) {
            c.api_key_env_var = v;
        }
        c.script = self.script.clone().or_else(|| file.script.clone());
        c.trajectory = self.replay_from.clone().or_else(|| file.replay_from.clone());
        if let Some(b) = self.char_budget.or(file.char_budget) {
            c.char_budget = b;
        }
        if let Some(m) = self.max_in_flight.or(file.max_in_flight) {
            c.max_in_flight = m;
        }
        if let Some(s) = self.random_seed.or(file.random_seed) {
            c.random_seed = s;
        }
        Ok(c)
    }
}
