use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use aps_core::entailment::{BackendKind, ScorerBackend};
use aps_core::formats::FormatConfig;
use aps_core::rose::AlignmentConfig;
use aps_core::synth::GEN_ENDPOINT_ENV;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    pub temperature: f64,
    pub max_attempts: u32,
    pub retry_delay_ms: u64,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            endpoint: None,
            timeout_secs: 120.0,
            temperature: 1.0,
            max_attempts: 3,
            retry_delay_ms: 500,
        }
    }
}

impl GenerationSettings {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.0))
    }

    pub fn retry_delay(&self) -> Duration {
        Duration::from_millis(self.retry_delay_ms)
    }
}

/// Everything a subcommand needs besides its own file arguments. Loaded
/// from `--config` (TOML), then overridden by environment and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub scorer: ScorerBackend,
    pub format: FormatConfig,
    pub alignment: AlignmentConfig,
    pub generation: GenerationSettings,
    pub concurrency: usize,
    pub seed: u64,
    pub paths: Paths,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            scorer: ScorerBackend::default(),
            format: FormatConfig::default(),
            alignment: AlignmentConfig::default(),
            generation: GenerationSettings::default(),
            concurrency: 8,
            seed: 0,
            paths: Paths::default(),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scorer: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub concurrency: Option<usize>,
}

impl ToolConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.scorer = cfg.scorer.with_env_override();
        if let Ok(endpoint) = std::env::var(GEN_ENDPOINT_ENV) {
            if !endpoint.trim().is_empty() {
                cfg.generation.endpoint = Some(endpoint);
            }
        }
        if let Some(kind) = flags.scorer {
            cfg.scorer.kind = kind;
        }
        if let Some(endpoint) = &flags.endpoint {
            cfg.scorer.endpoint = Some(endpoint.clone());
        }
        if let Some(tau) = flags.tau {
            cfg.alignment.tau = tau;
        }
        if let Some(seed) = flags.seed {
            cfg.seed = seed;
        }
        if let Some(n) = flags.concurrency {
            cfg.concurrency = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.concurrency == 0 {
            bail!("concurrency must be at least 1");
        }
        self.scorer.validate()?;
        self.format.validate()?;
        self.alignment.validate()?;
        let p = &self.paths;
        if p.input.is_some() && (p.input == p.output || p.input == p.report) {
            bail!("input path must differ from output and report paths");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_overrides() {
        let raw = r#"
            concurrency = 4
            seed = 7
            [scorer]
            kind = "remote"
            endpoint = "http://localhost:9000"
            timeout = 2.5
            [alignment]
            tau = 0.8
            [paths]
            input = "in.jsonl"
        "#;
        let cfg: ToolConfig = toml::from_str(raw).unwrap();
        assert_eq!(cfg.scorer.kind, BackendKind::Remote);
        assert_eq!(cfg.scorer.timeout, Duration::from_millis(2500));
        assert_eq!(cfg.format, FormatConfig::default());
        assert_eq!(cfg.concurrency, 4);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aps.toml");
        std::fs::write(&path, raw).unwrap();
        let flags = Overrides { scorer: Some(BackendKind::Oracle), tau: Some(0.95), ..Overrides::default() };
        let cfg = ToolConfig::resolve(Some(&path), &flags).unwrap();
        assert_eq!(cfg.scorer.kind, BackendKind::Oracle);
        assert_eq!(cfg.alignment.tau, 0.95);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn rejects_bad_values() {
        let flags = Overrides { concurrency: Some(0), ..Overrides::default() };
        assert!(ToolConfig::resolve(None, &flags).is_err());
        let flags = Overrides { tau: Some(1.5), ..Overrides::default() };
        assert!(ToolConfig::resolve(None, &flags).is_err());
        assert!(toml::from_str::<ToolConfig>("bogus = 1").is_err());
        let mut cfg = ToolConfig::default();
        cfg.paths.input = Some("a".into());
        cfg.paths.output = Some("a".into());
        assert!(cfg.validate().is_err());
    }
}
