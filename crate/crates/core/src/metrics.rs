//! Reference-free (RF) and reference-based (RB) proposition metrics.
//!
//! RF metrics compare predictions with the passage: precision asks whether
//! each predicted proposition is entailed by the passage, recall whether each
//! sentence is entailed by the space-joined predictions. RB metrics compare
//! predictions with gold propositions through bidirectional entailment
//! (`min` of both directions): precision averages, over predictions, the best
//! BiNLI value against any gold proposition, and recall does the same over
//! gold propositions.
//!
//! All values are fractions in `[0, 1]`. Every scorer call needed by one
//! metric is sent as a single batch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entailment::{EntailmentScorer, ScoreError, ScorePair};
use crate::types::{concat_propositions, DatasetExample, Passage, Proposition, PropositionSet};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("prediction set is empty")]
    EmptyPredictions,
    #[error("gold proposition set is empty")]
    EmptyGold,
    #[error("passage has no sentences")]
    EmptyPassage,
    #[error(transparent)]
    Scorer(#[from] ScoreError),
    #[error("{examples} examples but {predictions} prediction sets")]
    LengthMismatch { examples: usize, predictions: usize },
    #[error("example {id}: {source}")]
    Example {
        id: String,
        #[source]
        source: Box<MetricError>,
    },
    #[error("correlation needs two equal-length series of at least 2 values (got {xs} and {ys})")]
    BadSeries { xs: usize, ys: usize },
    #[error("correlation is undefined for a constant series")]
    DegenerateInput,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn scores(scorer: &dyn EntailmentScorer, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, MetricError> {
    Ok(scorer.score_batch(pairs)?.into_iter().map(|s| s.value()).collect())
}

/// Per-prediction `NLI(passage, q)` values.
pub fn rf_precision_scores(
    predictions: &PropositionSet,
    passage: &Passage,
    scorer: &dyn EntailmentScorer,
) -> Result<Vec<f64>, MetricError> {
    if predictions.is_empty() {
        return Err(MetricError::EmptyPredictions);
    }
    if passage.text.trim().is_empty() {
        return Err(MetricError::EmptyPassage);
    }
    let pairs: Vec<ScorePair<'_>> = predictions.texts().map(|q| (passage.text.as_str(), q)).collect();
    scores(scorer, &pairs)
}

/// Mean entailment of each predicted proposition by the passage text,
/// normalized by the number of predictions.
pub fn rf_precision(
    predictions: &PropositionSet,
    passage: &Passage,
    scorer: &dyn EntailmentScorer,
) -> Result<f64, MetricError> {
    Ok(mean(&rf_precision_scores(predictions, passage, scorer)?))
}

/// Per-sentence `NLI(joined predictions, s)` values.
pub fn rf_recall_scores(
    predictions: &PropositionSet,
    passage: &Passage,
    scorer: &dyn EntailmentScorer,
) -> Result<Vec<f64>, MetricError> {
    if predictions.is_empty() {
        return Err(MetricError::EmptyPredictions);
    }
    if passage.is_empty() {
        return Err(MetricError::EmptyPassage);
    }
    let joined = concat_propositions(predictions);
    let pairs: Vec<ScorePair<'_>> = passage.sentence_texts().map(|s| (joined.as_str(), s)).collect();
    scores(scorer, &pairs)
}

/// Mean entailment of each passage sentence by the space-joined predictions.
pub fn rf_recall(
    predictions: &PropositionSet,
    passage: &Passage,
    scorer: &dyn EntailmentScorer,
) -> Result<f64, MetricError> {
    Ok(mean(&rf_recall_scores(predictions, passage, scorer)?))
}

/// `min(NLI(p, q), NLI(q, p))`.
pub fn bi_nli(p: &Proposition, q: &Proposition, scorer: &dyn EntailmentScorer) -> Result<f64, MetricError> {
    let s = scores(scorer, &[(p.text(), q.text()), (q.text(), p.text())])?;
    Ok(s[0].min(s[1]))
}

/// BiNLI values for every gold/predicted pair: `matrix[i][j]` is
/// `bi_nli(gold[i], predicted[j])`.
pub fn binli_matrix(
    gold: &PropositionSet,
    predictions: &PropositionSet,
    scorer: &dyn EntailmentScorer,
) -> Result<Vec<Vec<f64>>, MetricError> {
    if predictions.is_empty() {
        return Err(MetricError::EmptyPredictions);
    }
    if gold.is_empty() {
        return Err(MetricError::EmptyGold);
    }
    let gold: Vec<&str> = gold.texts().collect();
    let pred: Vec<&str> = predictions.texts().collect();
    let mut pairs = Vec::with_capacity(2 * gold.len() * pred.len());
    for &p in &gold {
        for &q in &pred {
            pairs.push((p, q));
            pairs.push((q, p));
        }
    }
    let flat = scores(scorer, &pairs)?;
    Ok(flat.chunks(2 * pred.len()).map(|row| row.chunks(2).map(|d| d[0].min(d[1])).collect()).collect())
}

fn best_per_prediction(matrix: &[Vec<f64>]) -> Vec<f64> {
    let cols = matrix[0].len();
    (0..cols).map(|j| matrix.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max)).collect()
}

fn best_per_gold(matrix: &[Vec<f64>]) -> Vec<f64> {
    matrix.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect()
}

/// For each prediction, the best BiNLI value against any gold proposition,
/// averaged over predictions.
pub fn rb_precision(
    predictions: &PropositionSet,
    gold: &PropositionSet,
    scorer: &dyn EntailmentScorer,
) -> Result<f64, MetricError> {
    Ok(mean(&best_per_prediction(&binli_matrix(gold, predictions, scorer)?)))
}

/// For each gold proposition, the best BiNLI value against any prediction,
/// averaged over gold propositions.
pub fn rb_recall(
    predictions: &PropositionSet,
    gold: &PropositionSet,
    scorer: &dyn EntailmentScorer,
) -> Result<f64, MetricError> {
    Ok(mean(&best_per_gold(&binli_matrix(gold, predictions, scorer)?)))
}

/// Harmonic mean, with `f1(0, 0) = 0`.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One proposition per sentence, grouped under its sentence.
pub fn sentence_baseline(passage: &Passage) -> PropositionSet {
    PropositionSet::grouped(passage.sentences.iter().map(|s| [s.text.as_str()])).expect("sentences are never blank")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl PrecisionRecall {
    pub fn new(p: f64, r: f64) -> Self {
        PrecisionRecall { p, r, f1: f1(p, r) }
    }
}

/// Metrics for one example, with the raw values they were averaged from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScores {
    pub id: String,
    pub rf: PrecisionRecall,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb: Option<PrecisionRecall>,
    pub n_props: usize,
    /// `NLI(passage, q)` per prediction.
    pub rf_precision_scores: Vec<f64>,
    /// `NLI(joined predictions, s)` per sentence.
    pub rf_recall_scores: Vec<f64>,
    /// Best BiNLI per prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb_precision_best: Option<Vec<f64>>,
    /// Best BiNLI per gold proposition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb_recall_best: Option<Vec<f64>>,
}

/// Scores one prediction set. RB metrics are computed only when `gold` is
/// given and non-empty.
pub fn evaluate_example(
    passage: &Passage,
    predictions: &PropositionSet,
    gold: Option<&PropositionSet>,
    scorer: &dyn EntailmentScorer,
) -> Result<ExampleScores, MetricError> {
    let rf_p = rf_precision_scores(predictions, passage, scorer)?;
    let rf_r = rf_recall_scores(predictions, passage, scorer)?;
    let (rb, rb_p, rb_r) = match gold.filter(|g| !g.is_empty()) {
        Some(gold) => {
            let matrix = binli_matrix(gold, predictions, scorer)?;
            let bp = best_per_prediction(&matrix);
            let br = best_per_gold(&matrix);
            (Some(PrecisionRecall::new(mean(&bp), mean(&br))), Some(bp), Some(br))
        }
        None => (None, None, None),
    };
    Ok(ExampleScores {
        id: passage.id.clone(),
        rf: PrecisionRecall::new(mean(&rf_p), mean(&rf_r)),
        rb,
        n_props: predictions.len(),
        rf_precision_scores: rf_p,
        rf_recall_scores: rf_r,
        rb_precision_best: rb_p,
        rb_recall_best: rb_r,
    })
}

/// Corpus-level metrics.
///
/// Precision and recall are macro averages over examples; each F1 is the
/// harmonic mean of the reported precision and recall. RB fields are present
/// only when every example had gold propositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rf_p: f64,
    pub rf_r: f64,
    pub rf_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb_f1: Option<f64>,
    pub avg_props: f64,
    pub n_examples: usize,
}

/// Sequential, order-preserving reduction of per-example scores. Returns
/// `None` for an empty slice.
pub fn aggregate(per_example: &[ExampleScores]) -> Option<MetricReport> {
    if per_example.is_empty() {
        return None;
    }
    let n = per_example.len() as f64;
    let sum = |f: &dyn Fn(&ExampleScores) -> f64| per_example.iter().map(f).sum::<f64>() / n;
    let rf_p = sum(&|e| e.rf.p);
    let rf_r = sum(&|e| e.rf.r);
    let rb = per_example.iter().all(|e| e.rb.is_some()).then(|| (sum(&|e| e.rb.unwrap().p), sum(&|e| e.rb.unwrap().r)));
    Some(MetricReport {
        rf_p,
        rf_r,
        rf_f1: f1(rf_p, rf_r),
        rb_p: rb.map(|(p, _)| p),
        rb_r: rb.map(|(_, r)| r),
        rb_f1: rb.map(|(p, r)| f1(p, r)),
        avg_props: sum(&|e| e.n_props as f64),
        n_examples: per_example.len(),
    })
}

fn evaluate_one(
    example: &DatasetExample,
    prediction: &PropositionSet,
    scorer: &dyn EntailmentScorer,
) -> Result<ExampleScores, MetricError> {
    evaluate_example(&example.passage, prediction, Some(&example.gold), scorer)
        .map_err(|e| MetricError::Example { id: example.id().to_owned(), source: Box::new(e) })
}

/// Scores every example against its positionally aligned prediction and
/// macro-averages the results.
pub fn evaluate_corpus(
    examples: &[DatasetExample],
    predictions: &[PropositionSet],
    scorer: &dyn EntailmentScorer,
) -> Result<MetricReport, MetricError> {
    check_lengths(examples, predictions)?;
    let per_example = examples
        .iter()
        .zip(predictions)
        .map(|(ex, pred)| evaluate_one(ex, pred, scorer))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate(&per_example).ok_or(MetricError::LengthMismatch { examples: 0, predictions: 0 })
}

/// Like [`evaluate_corpus`] but scores examples on `threads` workers. The
/// per-example results are reduced in example order, so the report is
/// bit-identical for any thread count.
pub fn evaluate_corpus_parallel(
    examples: &[DatasetExample],
    predictions: &[PropositionSet],
    scorer: &dyn EntailmentScorer,
    threads: usize,
) -> Result<(MetricReport, Vec<ExampleScores>), MetricError> {
    check_lengths(examples, predictions)?;
    let per_example =
        evaluate_each(examples, predictions, scorer, threads).into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = aggregate(&per_example).ok_or(MetricError::LengthMismatch { examples: 0, predictions: 0 })?;
    Ok((report, per_example))
}

/// Scores each example on `threads` workers without stopping at the first
/// failure. Results are in example order; extra items in the longer slice
/// are ignored.
pub fn evaluate_each(
    examples: &[DatasetExample],
    predictions: &[PropositionSet],
    scorer: &dyn EntailmentScorer,
    threads: usize,
) -> Vec<Result<ExampleScores, MetricError>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    pool.install(|| {
        examples.par_iter().zip(predictions.par_iter()).map(|(ex, pred)| evaluate_one(ex, pred, scorer)).collect()
    })
}

fn check_lengths(examples: &[DatasetExample], predictions: &[PropositionSet]) -> Result<(), MetricError> {
    if examples.len() != predictions.len() || examples.is_empty() {
        return Err(MetricError::LengthMismatch { examples: examples.len(), predictions: predictions.len() });
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(MetricError::BadSeries { xs: xs.len(), ys: ys.len() });
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::DegenerateInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
