//! Synthetic multi-domain text generation and distillation records.
//!
//! The flow is: few-shot prompts over seed `(domain, length, text)` triples
//! ask a generator for new domain names; a (usually hand-curated) allowlist
//! selects domains; texts are generated per `(domain, length)`; candidates
//! sharing an n-gram with any seed text are dropped; finally a teacher model
//! labels each text in the grouped format and its output is parsed strictly.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{
    parse_grouped_output, render_grouped, render_grouped_input, FormatConfig, FormatError, TrainingRecord,
};
use crate::jsonl::write_atomic;
use crate::text::normalize_tokens;
use crate::types::{Passage, PropositionSet};

/// Environment variable holding the generation service endpoint.
pub const GEN_ENDPOINT_ENV: &str = "APS_GEN_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextLength {
    Short,
    Paragraph,
}

impl TextLength {
    pub const ALL: [TextLength; 2] = [TextLength::Short, TextLength::Paragraph];

    pub fn as_str(self) -> &'static str {
        match self {
            TextLength::Short => "short",
            TextLength::Paragraph => "paragraph",
        }
    }
}

impl fmt::Display for TextLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedExample {
    pub domain: String,
    pub length: TextLength,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("at least one seed example is required")]
    EmptySeeds,
    #[error("seed {index} has an empty domain or text")]
    InvalidSeed { index: usize },
    #[error("domain must be non-empty")]
    EmptyDomain,
    #[error("n-gram size must be at least 1")]
    ZeroNgram,
    #[error("checkpoint {path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path} is not valid JSON: {source}")]
    CheckpointFormat {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GenerationError {
    #[error("generation transport error: {0}")]
    Transport(String),
    #[error("generation protocol error: {0}")]
    Protocol(String),
}

impl GenerationError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GenerationError::Transport(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_attempts: u32,
}

/// A text-generation backend. Must tolerate concurrent calls.
pub trait GenerationClient: Send + Sync {
    fn generate(&self, prompt: &str, temperature: f64) -> Result<String, GenerationError>;
}

impl<C: GenerationClient + ?Sized> GenerationClient for &C {
    fn generate(&self, prompt: &str, temperature: f64) -> Result<String, GenerationError> {
        (**self).generate(prompt, temperature)
    }
}

impl<C: GenerationClient + ?Sized> GenerationClient for Box<C> {
    fn generate(&self, prompt: &str, temperature: f64) -> Result<String, GenerationError> {
        (**self).generate(prompt, temperature)
    }
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    prompt: &'a str,
    temperature: f64,
}

#[derive(Deserialize)]
struct GenerateReply {
    text: String,
}

/// Client for `POST /generate` (`{"prompt", "temperature"}` → `{"text"}`).
pub struct HttpGenerationClient {
    url: String,
    agent: ureq::Agent,
}

impl HttpGenerationClient {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let endpoint = endpoint.into();
        let url = if endpoint.trim_end_matches('/').ends_with("/generate") {
            endpoint
        } else {
            format!("{}/generate", endpoint.trim_end_matches('/'))
        };
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        HttpGenerationClient { url, agent }
    }
}

impl GenerationClient for HttpGenerationClient {
    fn generate(&self, prompt: &str, temperature: f64) -> Result<String, GenerationError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&GenerateBody { prompt, temperature })
            .map_err(|e| GenerationError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || (500..600).contains(&status) {
            return Err(GenerationError::Transport(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(GenerationError::Protocol(format!("HTTP {status}")));
        }
        let reply: GenerateReply =
            resp.body_mut().read_json().map_err(|e| GenerationError::Protocol(format!("malformed response: {e}")))?;
        Ok(reply.text)
    }
}

/// Calls `client` up to `req.max_attempts` times, doubling `delay` between
/// retryable failures.
pub fn generate_with_retry(
    client: &dyn GenerationClient,
    req: &GenerationRequest,
    delay: Duration,
) -> Result<String, GenerationError> {
    let attempts = req.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        match client.generate(&req.prompt, req.temperature) {
            Ok(text) => return Ok(text),
            Err(e) if e.is_retryable() && attempt + 1 < attempts => {
                let wait = delay.saturating_mul(1 << attempt.min(16));
                warn!("generation failed ({e}); retrying in {wait:?}");
                thread::sleep(wait);
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

fn check_seeds(seeds: &[SeedExample]) -> Result<(), SynthError> {
    if seeds.is_empty() {
        return Err(SynthError::EmptySeeds);
    }
    if let Some(index) = seeds.iter().position(|s| s.domain.trim().is_empty() || s.text.trim().is_empty()) {
        return Err(SynthError::InvalidSeed { index });
    }
    Ok(())
}

fn seed_blocks(seeds: &[SeedExample]) -> String {
    seeds
        .iter()
        .map(|s| format!("Domain: {}\nLength: {}\nText: {}", s.domain.trim(), s.length, s.text.trim()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Few-shot prompt asking for a new domain name.
pub fn build_domain_prompt(seeds: &[SeedExample]) -> Result<String, SynthError> {
    check_seeds(seeds)?;
    Ok(format!("{}\n\nDomain:", seed_blocks(seeds)))
}

/// Few-shot prompt asking for a text in `domain` with the given length.
pub fn build_text_prompt(seeds: &[SeedExample], domain: &str, length: TextLength) -> Result<String, SynthError> {
    check_seeds(seeds)?;
    let domain = domain.trim();
    if domain.is_empty() {
        return Err(SynthError::EmptyDomain);
    }
    Ok(format!("{}\n\nDomain: {domain}\nLength: {length}\nText:", seed_blocks(seeds)))
}

/// Extracts a domain name from a generator reply: the first non-empty line,
/// without any echoed `Domain:` label, lowercased.
pub fn parse_domain_reply(reply: &str) -> Option<String> {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = match line.get(..7) {
        Some(label) if label.eq_ignore_ascii_case("domain:") => line[7..].trim(),
        _ => line,
    };
    let domain = line.trim_end_matches(|c: char| c.is_ascii_punctuation()).trim().to_lowercase();
    (!domain.is_empty()).then_some(domain)
}

/// Extracts the generated text, cutting off any further few-shot block the
/// generator may have continued with.
pub fn parse_text_reply(reply: &str) -> Option<String> {
    let text = reply.split("\n\nDomain:").next().unwrap_or_default().trim();
    (!text.is_empty()).then(|| text.to_owned())
}

fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = &[String]> {
    tokens.windows(n)
}

/// Splits `candidates` into those sharing no contiguous `n`-token sequence
/// with any seed (kept) and the rest (dropped). Tokens come from
/// [`normalize_tokens`]. Both parts keep input order.
pub fn ngram_overlap_filter<T, S>(candidates: Vec<T>, seeds: &[S], n: usize) -> Result<(Vec<T>, Vec<T>), SynthError>
where
    T: AsRef<str>,
    S: AsRef<str>,
{
    if n == 0 {
        return Err(SynthError::ZeroNgram);
    }
    let seed_tokens: Vec<Vec<String>> = seeds.iter().map(|s| normalize_tokens(s.as_ref())).collect();
    let index: HashSet<&[String]> = seed_tokens.iter().flat_map(|t| ngrams(t, n)).collect();
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for c in candidates {
        let tokens = normalize_tokens(c.as_ref());
        if ngrams(&tokens, n).any(|g| index.contains(g)) {
            dropped.push(c);
        } else {
            kept.push(c);
        }
    }
    Ok((kept, dropped))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedText {
    pub domain: String,
    pub length: TextLength,
    pub index: usize,
    pub text: String,
}

impl GeneratedText {
    pub fn key(&self) -> (&str, TextLength, usize) {
        (&self.domain, self.length, self.index)
    }

    pub fn source_id(&self) -> String {
        format!("{}/{}/{}", self.domain, self.length, self.index)
    }
}

impl AsRef<str> for GeneratedText {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallFailure {
    /// `"domain"` or the `domain/length/index` key of a text call.
    pub call: String,
    pub error: String,
}

/// Resumable generation state, persisted as JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub domain_calls_done: usize,
    pub discovered: Vec<String>,
    pub texts: Vec<GeneratedText>,
    pub failures: Vec<CallFailure>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Option<Self>, SynthError> {
        match fs::read_to_string(path) {
            Ok(s) => serde_json::from_str(&s)
                .map(Some)
                .map_err(|source| SynthError::CheckpointFormat { path: path.to_owned(), source }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(SynthError::Checkpoint { path: path.to_owned(), source }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let json = serde_json::to_string_pretty(self).expect("serializable");
        write_atomic(path, json.as_bytes()).map_err(|source| SynthError::Checkpoint { path: path.to_owned(), source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub n_domain_calls: usize,
    /// Domains allowed through; `None` keeps every discovered domain.
    pub allowlist: Option<Vec<String>>,
    pub texts_per_pair: usize,
    pub lengths: Vec<TextLength>,
    pub temperature: f64,
    pub max_attempts: u32,
    pub retry_delay: Duration,
    pub concurrency: usize,
    pub checkpoint_every: usize,
    pub checkpoint_path: Option<PathBuf>,
    pub ngram_n: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_domain_calls: 100,
            allowlist: None,
            texts_per_pair: 1,
            lengths: TextLength::ALL.to_vec(),
            temperature: 1.0,
            max_attempts: 3,
            retry_delay: Duration::from_millis(500),
            concurrency: 8,
            checkpoint_every: 100,
            checkpoint_path: None,
            ngram_n: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusOutput {
    pub discovered: Vec<String>,
    pub selected: Vec<String>,
    pub kept: Vec<GeneratedText>,
    pub dropped: Vec<GeneratedText>,
    pub failures: Vec<CallFailure>,
}

struct Runner<'a> {
    client: &'a dyn GenerationClient,
    cfg: &'a CorpusConfig,
    pool: rayon::ThreadPool,
    state: Checkpoint,
}

impl Runner<'_> {
    fn request(&self, prompt: String) -> GenerationRequest {
        GenerationRequest { prompt, temperature: self.cfg.temperature, max_attempts: self.cfg.max_attempts }
    }

    fn save(&self) -> Result<(), SynthError> {
        match &self.cfg.checkpoint_path {
            Some(path) => self.state.save(path),
            None => Ok(()),
        }
    }

    fn discover(&mut self, seeds: &[SeedExample]) -> Result<(), SynthError> {
        let prompt = build_domain_prompt(seeds)?;
        let mut known: HashSet<String> = seeds.iter().map(|s| s.domain.trim().to_lowercase()).collect();
        known.extend(self.state.discovered.iter().cloned());
        let step = self.cfg.checkpoint_every.max(1);
        while self.state.domain_calls_done < self.cfg.n_domain_calls {
            let batch = step.min(self.cfg.n_domain_calls - self.state.domain_calls_done);
            let req = self.request(prompt.clone());
            let replies: Vec<_> = self.pool.install(|| {
                (0..batch)
                    .into_par_iter()
                    .map(|_| generate_with_retry(self.client, &req, self.cfg.retry_delay))
                    .collect()
            });
            for reply in replies {
                match reply {
                    Ok(reply) => {
                        if let Some(domain) = parse_domain_reply(&reply) {
                            if known.insert(domain.clone()) {
                                self.state.discovered.push(domain);
                            }
                        }
                    }
                    Err(e) => self.state.failures.push(CallFailure { call: "domain".into(), error: e.to_string() }),
                }
            }
            self.state.domain_calls_done += batch;
            self.save()?;
        }
        Ok(())
    }

    fn texts(&mut self, seeds: &[SeedExample], domains: &[String]) -> Result<(), SynthError> {
        let done: HashSet<(String, TextLength, usize)> =
            self.state.texts.iter().map(|t| (t.domain.clone(), t.length, t.index)).collect();
        let mut jobs = Vec::new();
        for domain in domains {
            for &length in &self.cfg.lengths {
                for index in 0..self.cfg.texts_per_pair {
                    if !done.contains(&(domain.clone(), length, index)) {
                        jobs.push((domain.clone(), length, index));
                    }
                }
            }
        }
        info!("{} text calls pending ({} already done)", jobs.len(), done.len());
        for chunk in jobs.chunks(self.cfg.checkpoint_every.max(1)) {
            let results: Vec<_> = self.pool.install(|| {
                chunk
                    .par_iter()
                    .map(|(domain, length, index)| {
                        let prompt = build_text_prompt(seeds, domain, *length)?;
                        let result = generate_with_retry(self.client, &self.request(prompt), self.cfg.retry_delay);
                        Ok::<_, SynthError>((domain, *length, *index, result))
                    })
                    .collect::<Result<_, _>>()
            })?;
            for (domain, length, index, result) in results {
                let key = format!("{domain}/{length}/{index}");
                match result.map(|r| parse_text_reply(&r)) {
                    Ok(Some(text)) => {
                        self.state.texts.push(GeneratedText { domain: domain.clone(), length, index, text })
                    }
                    Ok(None) => self.state.failures.push(CallFailure { call: key, error: "empty text reply".into() }),
                    Err(e) => self.state.failures.push(CallFailure { call: key, error: e.to_string() }),
                }
            }
            self.save()?;
        }
        Ok(())
    }
}

/// Keeps discovered domains named in `allowlist` (case-insensitive), in
/// discovery order. Without an allowlist every discovered domain is kept.
pub fn select_domains(discovered: &[String], allowlist: Option<&[String]>) -> Vec<String> {
    match allowlist {
        None => discovered.to_vec(),
        Some(allow) => {
            let allow: HashSet<String> = allow.iter().map(|d| d.trim().to_lowercase()).collect();
            discovered.iter().filter(|d| allow.contains(*d)).cloned().collect()
        }
    }
}

fn runner<'a>(client: &'a dyn GenerationClient, cfg: &'a CorpusConfig) -> Result<Runner<'a>, SynthError> {
    let state = match &cfg.checkpoint_path {
        Some(path) => Checkpoint::load(path)?.unwrap_or_default(),
        None => Checkpoint::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.concurrency.max(1)).build().expect("thread pool");
    Ok(Runner { client, cfg, pool, state })
}

/// Runs only the domain-discovery phase. Returns newly seen domain names
/// (seed domains excluded) and failed calls.
pub fn discover_domains(
    client: &dyn GenerationClient,
    seeds: &[SeedExample],
    cfg: &CorpusConfig,
) -> Result<(Vec<String>, Vec<CallFailure>), SynthError> {
    let mut r = runner(client, cfg)?;
    r.discover(seeds)?;
    Ok((r.state.discovered, r.state.failures))
}

/// Runs only the text phase over `domains`. Returns texts sorted by
/// `(domain, length, index)` and failed calls.
pub fn generate_texts(
    client: &dyn GenerationClient,
    seeds: &[SeedExample],
    domains: &[String],
    cfg: &CorpusConfig,
) -> Result<(Vec<GeneratedText>, Vec<CallFailure>), SynthError> {
    check_seeds(seeds)?;
    let mut r = runner(client, cfg)?;
    r.texts(seeds, domains)?;
    let mut texts = r.state.texts;
    texts.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok((texts, r.state.failures))
}

/// Discovers domains, applies the allowlist, generates texts for each
/// selected `(domain, length)` and drops texts overlapping the seeds.
///
/// With a checkpoint path the run can be interrupted and restarted; calls
/// already completed are not repeated.
pub fn generate_corpus(
    client: &dyn GenerationClient,
    seeds: &[SeedExample],
    cfg: &CorpusConfig,
) -> Result<CorpusOutput, SynthError> {
    let mut r = runner(client, cfg)?;
    r.discover(seeds)?;
    let discovered = r.state.discovered.clone();
    let selected = select_domains(&discovered, cfg.allowlist.as_deref());
    r.texts(seeds, &selected)?;
    let mut texts = r.state.texts;
    texts.sort_by(|a, b| a.key().cmp(&b.key()));
    let seed_texts: Vec<&str> = seeds.iter().map(|s| s.text.as_str()).collect();
    let (kept, dropped) = ngram_overlap_filter(texts, &seed_texts, cfg.ngram_n)?;
    Ok(CorpusOutput { discovered, selected, kept, dropped, failures: r.state.failures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationRecord {
    pub source_id: String,
    pub text: String,
    pub propositions: PropositionSet,
    pub domain: String,
    pub length: TextLength,
    pub teacher_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quarantined {
    pub source_id: String,
    /// Teacher reply, absent when the call itself failed.
    pub raw: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistillationOutput {
    pub records: Vec<DistillationRecord>,
    pub training: Vec<TrainingRecord>,
    pub quarantined: Vec<Quarantined>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    pub teacher_id: String,
    pub concurrency: usize,
    pub max_attempts: u32,
    pub retry_delay: Duration,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            teacher_id: "teacher".into(),
            concurrency: 8,
            max_attempts: 3,
            retry_delay: Duration::from_millis(500),
        }
    }
}

enum Labeled {
    Ok(DistillationRecord, TrainingRecord),
    Bad(Quarantined),
}

fn label_one(
    text: &GeneratedText,
    teacher: &dyn GenerationClient,
    distill: &DistillConfig,
    cfg: &FormatConfig,
) -> Labeled {
    let source_id = text.source_id();
    let quarantine =
        |raw: Option<String>, error: String| Labeled::Bad(Quarantined { source_id: source_id.clone(), raw, error });
    let passage = Passage::new(source_id.clone(), text.text.clone());
    if passage.is_empty() {
        return quarantine(None, "text has no sentences".into());
    }
    let input = match render_grouped_input(&passage, cfg) {
        Ok(i) => i,
        Err(e) => return quarantine(None, e.to_string()),
    };
    let req = GenerationRequest { prompt: input, temperature: 0.0, max_attempts: distill.max_attempts };
    let raw = match generate_with_retry(teacher, &req, distill.retry_delay) {
        Ok(raw) => raw,
        Err(e) => return quarantine(None, e.to_string()),
    };
    let parsed = parse_grouped_output(&raw, passage.sentences.len(), cfg)
        .and_then(|props| render_grouped(&passage, &props, cfg).map(|rec| (props, rec)));
    match parsed {
        Ok((propositions, training)) => Labeled::Ok(
            DistillationRecord {
                source_id: source_id.clone(),
                text: text.text.clone(),
                propositions,
                domain: text.domain.clone(),
                length: text.length,
                teacher_id: distill.teacher_id.clone(),
            },
            training,
        ),
        Err(e) => quarantine(Some(raw), format_error_name(&e)),
    }
}

fn format_error_name(e: &FormatError) -> String {
    let kind = match e {
        FormatError::UnbalancedTokens { .. } => "UnbalancedTokens",
        FormatError::GroupCountMismatch { .. } => "GroupCountMismatch",
        FormatError::EmptyGroup { .. } => "EmptyGroup",
        FormatError::StrayText { .. } => "StrayText",
        FormatError::MissingBullet { .. } => "MissingBullet",
        FormatError::TokenCollision { .. } => "TokenCollision",
        FormatError::MultilineProposition { .. } => "MultilineProposition",
        _ => "FormatError",
    };
    format!("{kind}: {e}")
}

/// Labels each text with the teacher (temperature 0) in the grouped format.
/// Replies that fail strict parsing are quarantined with the raw reply;
/// output order follows input order.
pub fn build_distillation_records(
    texts: &[GeneratedText],
    teacher: &dyn GenerationClient,
    distill: &DistillConfig,
    cfg: &FormatConfig,
) -> Result<DistillationOutput, FormatError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(distill.concurrency.max(1)).build().expect("thread pool");
    let labeled: Vec<Labeled> =
        pool.install(|| texts.par_iter().map(|t| label_one(t, teacher, distill, cfg)).collect());
    let mut out = DistillationOutput::default();
    for l in labeled {
        match l {
            Labeled::Ok(rec, train) => {
                out.records.push(rec);
                out.training.push(train);
            }
            Labeled::Bad(q) => out.quarantined.push(q),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(domain: &str, length: TextLength, text: &str) -> SeedExample {
        SeedExample { domain: domain.into(), length, text: text.into() }
    }

    fn seeds(n: usize) -> Vec<SeedExample> {
        (0..n).map(|i| seed(&format!("domain {i}"), TextLength::Short, &format!("Seed text number {i}."))).collect()
    }

    #[test]
    fn domain_prompt_blocks() {
        let prompt = build_domain_prompt(&seeds(18)).unwrap();
        assert_eq!(prompt.matches("Domain:").count(), 19);
        assert_eq!(prompt.matches("Text:").count(), 18);
        assert!(prompt.ends_with("\n\nDomain:"));
        let first = prompt.find("domain 0").unwrap();
        let last = prompt.find("domain 17").unwrap();
        assert!(first < last);
        assert_eq!(build_domain_prompt(&seeds(1)).unwrap().matches("Text:").count(), 1);
        assert!(matches!(build_domain_prompt(&[]), Err(SynthError::EmptySeeds)));
    }

    #[test]
    fn text_prompt_suffix() {
        let s = vec![seed("reddit post", TextLength::Paragraph, "Hey there everyone!")];
        let p = build_text_prompt(&s, "reddit post", TextLength::Paragraph).unwrap();
        assert!(p.ends_with("Domain: reddit post\nLength: paragraph\nText:"));
        let short = build_text_prompt(&s, "brand new domain", TextLength::Short).unwrap();
        assert!(short.ends_with("Length: short\nText:"));
        assert!(matches!(build_text_prompt(&s, " ", TextLength::Short), Err(SynthError::EmptyDomain)));
    }

    #[test]
    fn reply_parsing() {
        assert_eq!(parse_domain_reply(" Cooking blog\nText: ..."), Some("cooking blog".into()));
        assert_eq!(parse_domain_reply("Domain: Sports News."), Some("sports news".into()));
        assert_eq!(parse_domain_reply("  \n "), None);
        assert_eq!(parse_text_reply(" Hello.\n\nDomain: x"), Some("Hello.".into()));
        assert_eq!(parse_text_reply("   "), None);
    }

    #[test]
    fn ngram_filter_thresholds() {
        let seeds = ["The quick brown fox jumps over the lazy dog."];
        let cands = vec![
            "I saw the quick brown fox yesterday.", // 4-gram "the quick brown fox"
            "A quick brown cat.",                   // only "quick brown"
            "Nothing in common.",
        ];
        let (kept, dropped) = ngram_overlap_filter(cands.clone(), &seeds, 4).unwrap();
        assert_eq!(dropped, vec!["I saw the quick brown fox yesterday."]);
        assert_eq!(kept, vec!["A quick brown cat.", "Nothing in common."]);
        let (kept3, _) = ngram_overlap_filter(vec!["x the quick brown y"], &seeds, 4).unwrap();
        assert_eq!(kept3.len(), 1);
        let (_, dropped1) = ngram_overlap_filter(cands.clone(), &seeds, 1).unwrap();
        assert_eq!(dropped1.len(), 2);
        let (kept_big, _) = ngram_overlap_filter(cands, &seeds, 50).unwrap();
        assert_eq!(kept_big.len(), 3);
        assert!(matches!(ngram_overlap_filter(vec!["a"], &seeds, 0), Err(SynthError::ZeroNgram)));
    }

    #[test]
    fn domain_selection() {
        let found = vec!["cooking blog".to_string(), "sports news".into(), "legal memo".into()];
        let allow = vec!["Legal Memo".to_string(), "cooking blog".into(), "poetry".into()];
        assert_eq!(select_domains(&found, Some(&allow)), vec!["cooking blog", "legal memo"]);
        assert_eq!(select_domains(&found, None), found);
    }
}
