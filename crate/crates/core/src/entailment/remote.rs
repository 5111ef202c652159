use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{check_pair, EntailmentScore, EntailmentScorer, ScoreError, ScorePair};

/// Backoff for retryable failures (HTTP 429, 5xx and transport errors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

#[derive(Serialize)]
struct WirePair<'a> {
    premise: &'a str,
    claim: &'a str,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

/// Client for an NLI service speaking `POST /score`.
///
/// Request body: `{"pairs": [{"premise": .., "claim": ..}, ..]}`; response:
/// `{"scores": [..]}` with one score per pair, in order. Scores outside
/// `[0, 1]` are clamped and counted in [`RemoteScorer::clamped_count`].
pub struct RemoteScorer {
    url: String,
    agent: ureq::Agent,
    max_batch: usize,
    retry: RetryPolicy,
    requests: AtomicU64,
    clamped: AtomicU64,
}

impl RemoteScorer {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, max_batch: usize) -> Self {
        let endpoint = endpoint.into();
        let url = if endpoint.trim_end_matches('/').ends_with("/score") {
            endpoint
        } else {
            format!("{}/score", endpoint.trim_end_matches('/'))
        };
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        RemoteScorer {
            url,
            agent,
            max_batch: max_batch.max(1),
            retry: RetryPolicy::default(),
            requests: AtomicU64::new(0),
            clamped: AtomicU64::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// HTTP requests issued so far, retries included.
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    /// Service values that fell outside `[0, 1]`.
    pub fn clamped_count(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    fn post_once(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScoreError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let body = ScoreRequest { pairs: pairs.iter().map(|&(premise, claim)| WirePair { premise, claim }).collect() };
        let mut resp = self.agent.post(&self.url).send_json(&body).map_err(|e| ScoreError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || (500..600).contains(&status) {
            return Err(ScoreError::Transport(format!("HTTP {status} from {}", self.url)));
        }
        if !(200..300).contains(&status) {
            return Err(ScoreError::Protocol(format!("HTTP {status} from {}", self.url)));
        }
        let parsed: ScoreResponse =
            resp.body_mut().read_json().map_err(|e| ScoreError::Protocol(format!("malformed response: {e}")))?;
        if parsed.scores.len() != pairs.len() {
            return Err(ScoreError::Protocol(format!("expected {} scores, got {}", pairs.len(), parsed.scores.len())));
        }
        Ok(parsed.scores)
    }

    fn post_with_retry(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        let mut attempt = 0;
        let raw = loop {
            match self.post_once(pairs) {
                Ok(raw) => break raw,
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    let delay = self.retry.delay(attempt);
                    warn!("scorer request failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        Ok(raw
            .into_iter()
            .map(|v| {
                EntailmentScore::new(v).unwrap_or_else(|| {
                    self.clamped.fetch_add(1, Ordering::Relaxed);
                    warn!("scorer returned out-of-range value {v}; clamping");
                    EntailmentScore::clamped(v)
                })
            })
            .collect())
    }
}

impl EntailmentScorer for RemoteScorer {
    fn score(&self, premise: &str, claim: &str) -> Result<EntailmentScore, ScoreError> {
        check_pair(premise, claim)?;
        Ok(self.post_with_retry(&[(premise, claim)])?[0])
    }

    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        for (i, &(p, c)) in pairs.iter().enumerate() {
            check_pair(p, c).map_err(|e| ScoreError::Batch { offset: i, source: Box::new(e) })?;
        }
        let mut out = Vec::with_capacity(pairs.len());
        for (chunk_no, chunk) in pairs.chunks(self.max_batch).enumerate() {
            let scores = self
                .post_with_retry(chunk)
                .map_err(|e| ScoreError::Batch { offset: chunk_no * self.max_batch, source: Box::new(e) })?;
            out.extend(scores);
        }
        Ok(out)
    }
}
