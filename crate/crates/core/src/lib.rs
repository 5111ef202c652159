//! Toolkit for abstractive proposition segmentation.
//!
//! The crate is split along the stages of the workflow:
//!
//! * [`types`] and [`segment`]: passages, sentences, propositions and the
//!   rule-based sentence splitter every other stage relies on.
//! * [`entailment`]: the `NLI(premise, claim)` primitive, with a remote
//!   service backend, an offline lexical oracle and an LRU score cache.
//! * [`metrics`]: reference-free and reference-based precision/recall/F1,
//!   the sentence baseline, corpus aggregation and Pearson correlation.
//! * [`formats`]: grouped and ungrouped training formats.
//! * [`rose`]: ACU cleanup, proposition-to-sentence alignment and filtering.
//! * [`synth`]: multi-domain synthetic text generation and distillation records.
//! * [`jsonl`]: on-disk record schemas.

pub mod entailment;
pub mod formats;
pub mod jsonl;
pub mod metrics;
pub mod rose;
pub mod segment;
pub mod synth;
pub mod text;
pub mod types;

pub use entailment::{EntailmentScore, EntailmentScorer, LexicalOracle, ScoreError};
pub use segment::split_sentences;
pub use types::{DatasetExample, Passage, Proposition, PropositionError, PropositionSet, Sentence, SetMode};
