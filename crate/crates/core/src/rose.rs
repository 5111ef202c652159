//! ROSE-style dataset preparation.
//!
//! Gold ACUs are cleaned ([`normalize_acu`]), de-duplicated
//! ([`dedupe_acus`]) and then aligned to passage sentences with an
//! entailment scorer ([`align_example`]). Examples where some proposition is
//! not entailed by any sentence (even with preceding context) are discarded as
//! unsupported; examples where some sentence receives no proposition are
//! discarded as non-comprehensive.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entailment::{EntailmentScorer, ScoreError, ScorePair};
use crate::types::{DatasetExample, Proposition, PropositionError, PropositionSet};

pub const DEFAULT_TAU: f64 = 0.9;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("alignment threshold must lie in (0, 1], got {0}")]
    InvalidTau(f64),
    #[error("example has no sentences")]
    EmptyPassage,
    #[error("example has no gold propositions")]
    EmptyGold,
    #[error("scoring proposition {proposition}: {source}")]
    Scorer {
        proposition: usize,
        #[source]
        source: ScoreError,
    },
    #[error(transparent)]
    Proposition(#[from] PropositionError),
    #[error("dev fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    pub tau: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig { tau: DEFAULT_TAU }
    }
}

impl AlignmentConfig {
    pub fn new(tau: f64) -> Result<Self, AlignError> {
        let cfg = AlignmentConfig { tau };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if self.tau > 0.0 && self.tau <= 1.0 {
            Ok(())
        } else {
            Err(AlignError::InvalidTau(self.tau))
        }
    }
}

/// Removes whitespace before a final period and appends a period to ACUs
/// that end with none of `.`, `!`, `?`.
pub fn normalize_acu(text: &str) -> String {
    let t = text.trim();
    if t.ends_with("...") || t.ends_with('!') || t.ends_with('?') {
        return t.to_owned();
    }
    match t.strip_suffix('.') {
        Some(stem) => format!("{}.", stem.trim_end()),
        None => format!("{t}."),
    }
}

fn stem(acu: &str) -> &str {
    acu.strip_suffix('.').unwrap_or(acu)
}

/// Drops every ACU whose text (final period removed) appears verbatim inside
/// another ACU. When two ACUs contain each other, the longer one survives, or
/// the later one on equal length. Survivors keep their order.
pub fn dedupe_acus<S: AsRef<str>>(acus: &[S]) -> Vec<String> {
    let acus: Vec<&str> = acus.iter().map(AsRef::as_ref).collect();
    let contains = |outer: usize, inner: usize| acus[outer].contains(stem(acus[inner]));
    let beaten = |i: usize, j: usize| {
        if !contains(j, i) {
            return false;
        }
        if !contains(i, j) {
            return true;
        }
        acus[i].len() < acus[j].len() || (acus[i].len() == acus[j].len() && i < j)
    };
    (0..acus.len()).filter(|&i| !(0..acus.len()).any(|j| j != i && beaten(i, j))).map(|i| acus[i].to_owned()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentStatus {
    Aligned,
    DiscardedUnsupported,
    DiscardedNonComprehensive,
}

impl AlignmentStatus {
    /// Reason string used in discard files.
    pub fn reason(self) -> &'static str {
        match self {
            AlignmentStatus::Aligned => "aligned",
            AlignmentStatus::DiscardedUnsupported => "unsupported",
            AlignmentStatus::DiscardedNonComprehensive => "non_comprehensive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignedVia {
    Sentence,
    Prefix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionDiagnostic {
    pub text: String,
    /// Highest-scoring single sentence (lowest index on ties).
    pub best_sentence: usize,
    pub best_score: f64,
    /// Sentence the proposition was attributed to, if any.
    pub aligned_sentence: Option<usize>,
    pub via: Option<AlignedVia>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDiagnostics {
    pub propositions: Vec<PropositionDiagnostic>,
    pub sentence_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOutcome {
    pub status: AlignmentStatus,
    /// The example with grouped gold; present only when aligned.
    pub aligned: Option<DatasetExample>,
    pub diagnostics: AlignmentDiagnostics,
}

fn align_one(
    sentences: &[&str],
    prefixes: &[String],
    prop: &str,
    tau: f64,
    scorer: &dyn EntailmentScorer,
) -> Result<PropositionDiagnostic, ScoreError> {
    let pairs: Vec<ScorePair<'_>> = sentences.iter().map(|&s| (s, prop)).collect();
    let scores = scorer.score_batch(&pairs)?;
    let (best_sentence, best_score) =
        scores
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bs), (i, s)| if s.value() > bs { (i, s.value()) } else { (bi, bs) });
    let mut diag =
        PropositionDiagnostic { text: prop.to_owned(), best_sentence, best_score, aligned_sentence: None, via: None };
    if best_score >= tau {
        diag.aligned_sentence = Some(best_sentence);
        diag.via = Some(AlignedVia::Sentence);
        return Ok(diag);
    }
    let pairs: Vec<ScorePair<'_>> = prefixes.iter().map(|p| (p.as_str(), prop)).collect();
    let prefix_scores = scorer.score_batch(&pairs)?;
    if let Some(i) = prefix_scores.iter().position(|s| s.value() >= tau) {
        diag.aligned_sentence = Some(i);
        diag.via = Some(AlignedVia::Prefix);
    }
    Ok(diag)
}

/// Attributes each gold proposition to a passage sentence.
///
/// For each proposition, the best-scoring sentence is taken if it reaches
/// `tau` (lowest index on ties). Otherwise the sentence is scored together
/// with every sentence before it (joined by single spaces) and the first
/// such prefix reaching `tau` wins. A proposition with no match makes the
/// example unsupported; a sentence with no proposition makes it
/// non-comprehensive.
pub fn align_example(
    example: &DatasetExample,
    cfg: &AlignmentConfig,
    scorer: &dyn EntailmentScorer,
) -> Result<AlignmentOutcome, AlignError> {
    cfg.validate()?;
    let sentences: Vec<&str> = example.passage.sentence_texts().collect();
    if sentences.is_empty() {
        return Err(AlignError::EmptyPassage);
    }
    if example.gold.is_empty() {
        return Err(AlignError::EmptyGold);
    }
    let prefixes: Vec<String> = (1..=sentences.len()).map(|i| sentences[..i].join(" ")).collect();

    let mut diagnostics = Vec::with_capacity(example.gold.len());
    for (j, prop) in example.gold.texts().enumerate() {
        let diag = align_one(&sentences, &prefixes, prop, cfg.tau, scorer)
            .map_err(|source| AlignError::Scorer { proposition: j, source })?;
        diagnostics.push(diag);
    }

    let mut sentence_counts = vec![0usize; sentences.len()];
    for d in &diagnostics {
        if let Some(i) = d.aligned_sentence {
            sentence_counts[i] += 1;
        }
    }
    let status = if diagnostics.iter().any(|d| d.aligned_sentence.is_none()) {
        AlignmentStatus::DiscardedUnsupported
    } else if sentence_counts.contains(&0) {
        AlignmentStatus::DiscardedNonComprehensive
    } else {
        AlignmentStatus::Aligned
    };

    let aligned = if status == AlignmentStatus::Aligned {
        let mut groups: Vec<Vec<Proposition>> = vec![Vec::new(); sentences.len()];
        for d in &diagnostics {
            let i = d.aligned_sentence.expect("aligned");
            groups[i].push(Proposition::attributed(&d.text, i)?);
        }
        Some(DatasetExample {
            passage: example.passage.clone(),
            gold: PropositionSet::from_groups(groups)?,
            meta: example.meta.clone(),
        })
    } else {
        None
    };

    Ok(AlignmentOutcome {
        status,
        aligned,
        diagnostics: AlignmentDiagnostics { propositions: diagnostics, sentence_counts },
    })
}

/// Normalizes and de-duplicates an example's gold ACUs, returning an
/// ungrouped gold set.
pub fn clean_gold(example: &DatasetExample) -> Result<DatasetExample, AlignError> {
    let normalized: Vec<String> = example.gold.texts().map(normalize_acu).collect();
    let gold = PropositionSet::ungrouped(dedupe_acus(&normalized))?;
    Ok(DatasetExample { passage: example.passage.clone(), gold, meta: example.meta.clone() })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub aligned: usize,
    pub unsupported: usize,
    pub non_comprehensive: usize,
    pub errored: usize,
}

impl PipelineReport {
    pub fn total(&self) -> usize {
        self.aligned + self.unsupported + self.non_comprehensive + self.errored
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discard {
    pub example: DatasetExample,
    pub status: AlignmentStatus,
    pub diagnostics: AlignmentDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineOutput {
    pub kept: Vec<DatasetExample>,
    pub discarded: Vec<Discard>,
    pub failures: Vec<ExampleFailure>,
    pub report: PipelineReport,
}

fn process(
    example: &DatasetExample,
    cfg: &AlignmentConfig,
    scorer: &dyn EntailmentScorer,
) -> Result<AlignmentOutcome, AlignError> {
    align_example(&clean_gold(example)?, cfg, scorer)
}

/// Cleans and aligns every example. Per-example failures are recorded and
/// never abort the run. Output order follows input order regardless of
/// `threads`.
pub fn run_pipeline(
    raw: &[DatasetExample],
    cfg: &AlignmentConfig,
    scorer: &dyn EntailmentScorer,
    threads: usize,
) -> Result<PipelineOutput, AlignError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    let outcomes: Vec<_> = pool.install(|| raw.par_iter().map(|ex| process(ex, cfg, scorer)).collect());

    let mut out = PipelineOutput::default();
    for (example, outcome) in raw.iter().zip(outcomes) {
        match outcome {
            Ok(AlignmentOutcome { status: AlignmentStatus::Aligned, aligned, .. }) => {
                out.report.aligned += 1;
                out.kept.push(aligned.expect("aligned example"));
            }
            Ok(AlignmentOutcome { status, diagnostics, .. }) => {
                match status {
                    AlignmentStatus::DiscardedUnsupported => out.report.unsupported += 1,
                    _ => out.report.non_comprehensive += 1,
                }
                out.discarded.push(Discard { example: example.clone(), status, diagnostics });
            }
            Err(e) => {
                out.report.errored += 1;
                out.failures.push(ExampleFailure { id: example.id().to_owned(), error: e.to_string() });
            }
        }
    }
    Ok(out)
}

/// Seeded random split. `round(len * dev_fraction)` examples go to dev; both
/// parts keep input order.
pub fn split_train_dev<T: Clone>(examples: &[T], dev_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), AlignError> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(AlignError::InvalidFraction(dev_fraction));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = (examples.len() as f64 * dev_fraction).round() as usize;
    let mut is_dev = vec![false; examples.len()];
    for &i in &order[..n_dev] {
        is_dev[i] = true;
    }
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (ex, dev_flag) in examples.iter().zip(is_dev) {
        if dev_flag {
            dev.push(ex.clone())
        } else {
            train.push(ex.clone())
        }
    }
    Ok((train, dev))
}
