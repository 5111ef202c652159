//! Python bindings.
//!
//! Propositions are passed as `list[str]` (ungrouped) or `list[list[str]]`
//! (one inner list per sentence). Functions that score take an optional
//! `Scorer`; without one the lexical oracle is used.

use std::time::Duration;

use aps_core::entailment::{BackendKind, ScoreError, ScorerBackend};
use aps_core::formats::{self, FormatConfig};
use aps_core::metrics::{self, ExampleScores, MetricError};
use aps_core::rose::{self, AlignmentConfig};
use aps_core::{synth, DatasetExample, EntailmentScorer, LexicalOracle, Passage, PropositionSet};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn score_err(e: ScoreError) -> PyErr {
    match e {
        ScoreError::EmptyInput => value_err(e),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn metric_err(e: MetricError) -> PyErr {
    match e {
        MetricError::Scorer(s) => score_err(s),
        other => value_err(other),
    }
}

#[derive(FromPyObject)]
enum Props {
    Flat(Vec<String>),
    Nested(Vec<Vec<String>>),
}

impl Props {
    fn into_set(self) -> PyResult<PropositionSet> {
        match self {
            Props::Flat(v) => PropositionSet::ungrouped(v),
            Props::Nested(g) => PropositionSet::grouped(g),
        }
        .map_err(value_err)
    }
}

fn nested(set: &PropositionSet) -> Vec<Vec<String>> {
    set.groups().iter().map(|g| g.iter().map(|p| p.text().to_owned()).collect()).collect()
}

/// Entailment scorer: the lexical oracle or a remote NLI service.
#[pyclass(frozen, name = "Scorer", module = "aps")]
struct PyScorer {
    inner: Box<dyn EntailmentScorer>,
    label: String,
}

#[pymethods]
impl PyScorer {
    #[staticmethod]
    fn oracle() -> Self {
        PyScorer { inner: Box::new(LexicalOracle), label: "oracle".into() }
    }

    /// Client for `POST {endpoint}/score`, with an LRU cache of
    /// `cache_capacity` pairs (0 disables it).
    #[staticmethod]
    #[pyo3(signature = (endpoint, timeout=60.0, max_batch=32, cache_capacity=100_000))]
    fn remote(endpoint: String, timeout: f64, max_batch: usize, cache_capacity: usize) -> PyResult<Self> {
        let backend = ScorerBackend {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.clone()),
            timeout: Duration::from_secs_f64(timeout.max(0.0)),
            max_batch,
            cache_capacity,
        };
        Ok(PyScorer { inner: backend.build().map_err(value_err)?, label: format!("remote({endpoint})") })
    }

    fn score(&self, py: Python<'_>, premise: &str, claim: &str) -> PyResult<f64> {
        py.detach(|| self.inner.score(premise, claim)).map(|s| s.value()).map_err(score_err)
    }

    fn score_batch(&self, py: Python<'_>, pairs: Vec<(String, String)>) -> PyResult<Vec<f64>> {
        let borrowed: Vec<(&str, &str)> = pairs.iter().map(|(p, c)| (p.as_str(), c.as_str())).collect();
        let scores = py.detach(|| self.inner.score_batch(&borrowed)).map_err(score_err)?;
        Ok(scores.into_iter().map(|s| s.value()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Scorer.{}", self.label)
    }
}

fn scorer_ref<'a>(scorer: &'a Option<PyRef<'_, PyScorer>>) -> &'a dyn EntailmentScorer {
    match scorer {
        Some(s) => s.inner.as_ref(),
        None => &LexicalOracle,
    }
}

/// A passage split into sentences. Spans are character offsets.
#[pyclass(frozen, name = "Passage", module = "aps")]
struct PyPassage {
    inner: Passage,
}

#[pymethods]
impl PyPassage {
    #[new]
    #[pyo3(signature = (text, id=String::new()))]
    fn new(text: String, id: String) -> Self {
        PyPassage { inner: Passage::new(id, text) }
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn text(&self) -> &str {
        &self.inner.text
    }

    #[getter]
    fn sentences(&self) -> Vec<String> {
        self.inner.sentence_texts().map(str::to_owned).collect()
    }

    #[getter]
    fn spans(&self) -> Vec<(usize, usize)> {
        let text = &self.inner.text;
        let chars = |byte: usize| text[..byte].chars().count();
        self.inner.sentences.iter().map(|s| (chars(s.span.start), chars(s.span.end))).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.sentences.len()
    }

    fn __repr__(&self) -> String {
        format!("Passage(id={:?}, sentences={})", self.inner.id, self.inner.sentences.len())
    }
}

#[pyfunction]
fn split_sentences(text: &str) -> Vec<String> {
    aps_core::split_sentences(text).into_iter().map(|s| s.text).collect()
}

#[pyfunction]
fn oracle_score(premise: &str, claim: &str) -> f64 {
    aps_core::entailment::lexical_oracle_score(premise, claim).value()
}

#[pyfunction]
#[pyo3(signature = (predictions, passage, scorer=None))]
fn rf_precision(
    py: Python<'_>,
    predictions: Props,
    passage: &str,
    scorer: Option<PyRef<'_, PyScorer>>,
) -> PyResult<f64> {
    let preds = predictions.into_set()?;
    let passage = Passage::new("", passage);
    let sc = scorer_ref(&scorer);
    py.detach(|| metrics::rf_precision(&preds, &passage, sc)).map_err(metric_err)
}

#[pyfunction]
#[pyo3(signature = (predictions, passage, scorer=None))]
fn rf_recall(py: Python<'_>, predictions: Props, passage: &str, scorer: Option<PyRef<'_, PyScorer>>) -> PyResult<f64> {
    let preds = predictions.into_set()?;
    let passage = Passage::new("", passage);
    let sc = scorer_ref(&scorer);
    py.detach(|| metrics::rf_recall(&preds, &passage, sc)).map_err(metric_err)
}

#[pyfunction]
#[pyo3(signature = (predictions, gold, scorer=None))]
fn rb_precision(py: Python<'_>, predictions: Props, gold: Props, scorer: Option<PyRef<'_, PyScorer>>) -> PyResult<f64> {
    let (preds, gold) = (predictions.into_set()?, gold.into_set()?);
    let sc = scorer_ref(&scorer);
    py.detach(|| metrics::rb_precision(&preds, &gold, sc)).map_err(metric_err)
}

#[pyfunction]
#[pyo3(signature = (predictions, gold, scorer=None))]
fn rb_recall(py: Python<'_>, predictions: Props, gold: Props, scorer: Option<PyRef<'_, PyScorer>>) -> PyResult<f64> {
    let (preds, gold) = (predictions.into_set()?, gold.into_set()?);
    let sc = scorer_ref(&scorer);
    py.detach(|| metrics::rb_recall(&preds, &gold, sc)).map_err(metric_err)
}

fn scores_dict<'py>(py: Python<'py>, s: &ExampleScores) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rf_p", s.rf.p)?;
    d.set_item("rf_r", s.rf.r)?;
    d.set_item("rf_f1", s.rf.f1)?;
    if let Some(rb) = s.rb {
        d.set_item("rb_p", rb.p)?;
        d.set_item("rb_r", rb.r)?;
        d.set_item("rb_f1", rb.f1)?;
    }
    d.set_item("n_props", s.n_props)?;
    Ok(d)
}

/// RF (and, with `gold`, RB) precision/recall/F1 for one passage.
#[pyfunction]
#[pyo3(signature = (passage, predictions, gold=None, scorer=None))]
fn evaluate<'py>(
    py: Python<'py>,
    passage: &str,
    predictions: Props,
    gold: Option<Props>,
    scorer: Option<PyRef<'_, PyScorer>>,
) -> PyResult<Bound<'py, PyDict>> {
    let preds = predictions.into_set()?;
    let gold = gold.map(Props::into_set).transpose()?;
    let passage = Passage::new("", passage);
    let sc = scorer_ref(&scorer);
    let scores = py.detach(|| metrics::evaluate_example(&passage, &preds, gold.as_ref(), sc)).map_err(metric_err)?;
    scores_dict(py, &scores)
}

#[pyfunction]
fn f1(precision: f64, recall: f64) -> f64 {
    metrics::f1(precision, recall)
}

#[pyfunction]
fn pearson(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    metrics::pearson(&xs, &ys).map_err(value_err)
}

#[pyfunction]
fn sentence_baseline(passage: &str) -> Vec<Vec<String>> {
    nested(&metrics::sentence_baseline(&Passage::new("", passage)))
}

/// Returns `(input, target)` for the grouped training format.
#[pyfunction]
fn render_grouped(passage: &str, groups: Vec<Vec<String>>) -> PyResult<(String, String)> {
    let gold = PropositionSet::grouped(groups).map_err(value_err)?;
    let rec =
        formats::render_grouped(&Passage::new("", passage), &gold, &FormatConfig::default()).map_err(value_err)?;
    Ok((rec.input_text, rec.target_text))
}

/// Returns `(input, target)` for the ungrouped training format.
#[pyfunction]
fn render_ungrouped(passage: &str, propositions: Vec<String>) -> PyResult<(String, String)> {
    let gold = PropositionSet::ungrouped(propositions).map_err(value_err)?;
    let rec =
        formats::render_ungrouped(&Passage::new("", passage), &gold, &FormatConfig::default()).map_err(value_err)?;
    Ok((rec.input_text, rec.target_text))
}

#[pyfunction]
fn parse_grouped_output(raw: &str, n_sentences: usize) -> PyResult<Vec<Vec<String>>> {
    let set = formats::parse_grouped_output(raw, n_sentences, &FormatConfig::default()).map_err(value_err)?;
    Ok(nested(&set))
}

#[pyfunction]
fn parse_ungrouped_output(raw: &str) -> PyResult<Vec<String>> {
    let set = formats::parse_ungrouped_output(raw, &FormatConfig::default()).map_err(value_err)?;
    Ok(set.texts().map(str::to_owned).collect())
}

#[pyfunction]
fn normalize_acu(text: &str) -> String {
    rose::normalize_acu(text)
}

#[pyfunction]
fn dedupe_acus(acus: Vec<String>) -> Vec<String> {
    rose::dedupe_acus(&acus)
}

/// Cleans `gold` and aligns it to the passage sentences. Returns a dict with
/// `status` ("aligned", "unsupported" or "non_comprehensive"), `groups`
/// (None unless aligned) and per-sentence proposition `counts`.
#[pyfunction]
#[pyo3(signature = (passage, gold, tau=rose::DEFAULT_TAU, scorer=None))]
fn align<'py>(
    py: Python<'py>,
    passage: &str,
    gold: Vec<String>,
    tau: f64,
    scorer: Option<PyRef<'_, PyScorer>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = AlignmentConfig::new(tau).map_err(value_err)?;
    let example = DatasetExample {
        passage: Passage::new("", passage),
        gold: PropositionSet::ungrouped(gold).map_err(value_err)?,
        meta: Default::default(),
    };
    let sc = scorer_ref(&scorer);
    let outcome = py
        .detach(|| {
            let cleaned = rose::clean_gold(&example)?;
            rose::align_example(&cleaned, &cfg, sc)
        })
        .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("status", outcome.status.reason())?;
    d.set_item("groups", outcome.aligned.as_ref().map(|ex| nested(&ex.gold)))?;
    d.set_item("counts", outcome.diagnostics.sentence_counts)?;
    Ok(d)
}

type Objects = Vec<Py<PyAny>>;

/// Seeded split of any list into `(train, dev)`, both in input order.
#[pyfunction]
fn split_train_dev(py: Python<'_>, items: Objects, dev_fraction: f64, seed: u64) -> PyResult<(Objects, Objects)> {
    let idx: Vec<usize> = (0..items.len()).collect();
    let (train, dev) = rose::split_train_dev(&idx, dev_fraction, seed).map_err(value_err)?;
    let pick = |ids: Vec<usize>| ids.into_iter().map(|i| items[i].clone_ref(py)).collect();
    Ok((pick(train), pick(dev)))
}

/// Splits `candidates` into those sharing no `n`-gram with any seed and
/// those that do.
#[pyfunction]
#[pyo3(signature = (candidates, seeds, n=4))]
fn ngram_overlap_filter(candidates: Vec<String>, seeds: Vec<String>, n: usize) -> PyResult<(Vec<String>, Vec<String>)> {
    synth::ngram_overlap_filter(candidates, &seeds, n).map_err(value_err)
}

#[pymodule]
fn aps(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScorer>()?;
    m.add_class::<PyPassage>()?;
    m.add_function(wrap_pyfunction!(split_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_score, m)?)?;
    m.add_function(wrap_pyfunction!(rf_precision, m)?)?;
    m.add_function(wrap_pyfunction!(rf_recall, m)?)?;
    m.add_function(wrap_pyfunction!(rb_precision, m)?)?;
    m.add_function(wrap_pyfunction!(rb_recall, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(f1, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(sentence_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(render_grouped, m)?)?;
    m.add_function(wrap_pyfunction!(render_ungrouped, m)?)?;
    m.add_function(wrap_pyfunction!(parse_grouped_output, m)?)?;
    m.add_function(wrap_pyfunction!(parse_ungrouped_output, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_acu, m)?)?;
    m.add_function(wrap_pyfunction!(dedupe_acus, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(split_train_dev, m)?)?;
    m.add_function(wrap_pyfunction!(ngram_overlap_filter, m)?)?;
    Ok(())
}
