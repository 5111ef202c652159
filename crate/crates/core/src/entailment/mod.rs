//! The `NLI(premise, claim)` primitive consumed by every metric and by the
//! alignment pipeline.
//!
//! Backends implement [`EntailmentScorer`]. [`LexicalOracle`] is a pure,
//! deterministic stand-in that lets everything run offline;
//! [`RemoteScorer`] talks to an external NLI service; [`CachedScorer`] wraps
//! either with an LRU cache.

mod cache;
mod oracle;
mod remote;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::CachedScorer;
pub use oracle::{lexical_oracle_score, LexicalOracle};
pub use remote::{RemoteScorer, RetryPolicy};

/// Environment variable that overrides the configured scorer endpoint.
pub const SCORER_ENDPOINT_ENV: &str = "APS_SCORER_ENDPOINT";

/// An entailment probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntailmentScore(f64);

impl EntailmentScore {
    pub const ZERO: EntailmentScore = EntailmentScore(0.0);
    pub const ONE: EntailmentScore = EntailmentScore(1.0);

    /// Returns `None` for values outside `[0, 1]` or NaN.
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(EntailmentScore(value))
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            EntailmentScore(0.0)
        } else {
            EntailmentScore(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for EntailmentScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("premise and claim must be non-empty")]
    EmptyInput,
    #[error("scorer transport error: {0}")]
    Transport(String),
    #[error("scorer protocol error: {0}")]
    Protocol(String),
    #[error("sub-batch starting at pair {offset} failed: {source}")]
    Batch {
        offset: usize,
        #[source]
        source: Box<ScoreError>,
    },
}

impl ScoreError {
    /// Transport failures can be retried; protocol errors and bad input cannot.
    pub fn is_retryable(&self) -> bool {
        match self {
            ScoreError::Transport(_) => true,
            ScoreError::Batch { source, .. } => source.is_retryable(),
            _ => false,
        }
    }
}

/// A `(premise, claim)` pair.
pub type ScorePair<'a> = (&'a str, &'a str);

pub(crate) fn check_pair(premise: &str, claim: &str) -> Result<(), ScoreError> {
    if premise.trim().is_empty() || claim.trim().is_empty() {
        Err(ScoreError::EmptyInput)
    } else {
        Ok(())
    }
}

/// Scores whether `premise` entails `claim`.
///
/// Implementations must be safe to call from many threads at once, and
/// `score_batch(pairs)[i]` must equal `score(pairs[i])`.
pub trait EntailmentScorer: Send + Sync {
    fn score(&self, premise: &str, claim: &str) -> Result<EntailmentScore, ScoreError>;

    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(p, c))| self.score(p, c).map_err(|e| ScoreError::Batch { offset: i, source: Box::new(e) }))
            .collect()
    }
}

impl<S: EntailmentScorer + ?Sized> EntailmentScorer for &S {
    fn score(&self, premise: &str, claim: &str) -> Result<EntailmentScore, ScoreError> {
        (**self).score(premise, claim)
    }

    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        (**self).score_batch(pairs)
    }
}

impl<S: EntailmentScorer + ?Sized> EntailmentScorer for Box<S> {
    fn score(&self, premise: &str, claim: &str) -> Result<EntailmentScore, ScoreError> {
        (**self).score(premise, claim)
    }

    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        (**self).score_batch(pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Oracle,
}

#[derive(Debug, Error, PartialEq)]
pub enum BackendConfigError {
    #[error("remote scorer requires an endpoint (set --endpoint or {SCORER_ENDPOINT_ENV})")]
    MissingEndpoint,
    #[error("max_batch must be at least 1")]
    ZeroBatch,
}

/// Which scorer to build and how to reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerBackend {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub max_batch: usize,
    pub cache_capacity: usize,
}

impl Default for ScorerBackend {
    fn default() -> Self {
        ScorerBackend {
            kind: BackendKind::Oracle,
            endpoint: None,
            timeout: Duration::from_secs(60),
            max_batch: 32,
            cache_capacity: 100_000,
        }
    }
}

impl ScorerBackend {
    pub fn validate(&self) -> Result<(), BackendConfigError> {
        if self.max_batch == 0 {
            return Err(BackendConfigError::ZeroBatch);
        }
        if self.kind == BackendKind::Remote && self.endpoint.is_none() {
            return Err(BackendConfigError::MissingEndpoint);
        }
        Ok(())
    }

    /// Applies `APS_SCORER_ENDPOINT` when it is set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(SCORER_ENDPOINT_ENV) {
            if !endpoint.trim().is_empty() {
                self.endpoint = Some(endpoint);
            }
        }
        self
    }

    /// Builds the configured scorer, wrapped in a cache when
    /// `cache_capacity > 0`.
    pub fn build(&self) -> Result<Box<dyn EntailmentScorer>, BackendConfigError> {
        self.validate()?;
        let inner: Box<dyn EntailmentScorer> = match self.kind {
            BackendKind::Oracle => Box::new(LexicalOracle),
            BackendKind::Remote => {
                let endpoint = self.endpoint.clone().ok_or(BackendConfigError::MissingEndpoint)?;
                Box::new(RemoteScorer::new(endpoint, self.timeout, self.max_batch))
            }
        };
        Ok(match std::num::NonZeroUsize::new(self.cache_capacity) {
            Some(cap) => Box::new(CachedScorer::new(inner, cap)),
            None => inner,
        })
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_bounds() {
        assert!(EntailmentScore::new(1.2).is_none());
        assert!(EntailmentScore::new(f64::NAN).is_none());
        assert_eq!(EntailmentScore::clamped(-0.3).value(), 0.0);
        assert_eq!(EntailmentScore::clamped(1.7).value(), 1.0);
        assert_eq!(EntailmentScore::clamped(f64::NAN).value(), 0.0);
    }

    #[test]
    fn backend_validation() {
        let remote = ScorerBackend { kind: BackendKind::Remote, ..Default::default() };
        assert_eq!(remote.validate(), Err(BackendConfigError::MissingEndpoint));
        let zero = ScorerBackend { max_batch: 0, ..Default::default() };
        assert_eq!(zero.validate(), Err(BackendConfigError::ZeroBatch));
        assert!(ScorerBackend::default().build().is_ok());
    }

    #[test]
    fn backend_config_serde() {
        let cfg: ScorerBackend =
            serde_json::from_str(r#"{"kind":"remote","endpoint":"http://x","timeout":2.5}"#).unwrap();
        assert_eq!(cfg.kind, BackendKind::Remote);
        assert_eq!(cfg.timeout, Duration::from_millis(2500));
        assert_eq!(cfg.max_batch, 32);
    }

    #[test]
    fn retryability() {
        assert!(ScoreError::Transport("x".into()).is_retryable());
        assert!(!ScoreError::Protocol("x".into()).is_retryable());
        let wrapped = ScoreError::Batch { offset: 3, source: Box::new(ScoreError::Transport("t".into())) };
        assert!(wrapped.is_retryable());
    }
}
