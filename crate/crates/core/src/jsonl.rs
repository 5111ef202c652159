//! On-disk record schemas and JSONL helpers.
//!
//! Dataset and prediction files share one line schema:
//!
//! ```json
//! {"id": "ex1", "text": "…", "propositions": ["…"] | [["…"], …], "grouped": false, "meta": {}}
//! ```
//!
//! `text` may be omitted in prediction files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{DatasetExample, Passage, PropositionError, PropositionSet, SetMode};

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("record {id}: missing text")]
    MissingText { id: String },
    #[error("record {id}: grouped flag does not match the propositions shape")]
    ShapeMismatch { id: String },
    #[error("record {id}: {source}")]
    Proposition {
        id: String,
        #[source]
        source: PropositionError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropositionsField {
    Flat(Vec<String>),
    Nested(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub propositions: PropositionsField,
    #[serde(default)]
    pub grouped: bool,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl ExampleRecord {
    pub fn propositions(&self) -> Result<PropositionSet, RecordError> {
        let id = || self.id.clone();
        let wrap = |source| RecordError::Proposition { id: id(), source };
        match (&self.propositions, self.grouped) {
            (PropositionsField::Nested(groups), true) => PropositionSet::grouped(groups).map_err(wrap),
            // an empty list parses as Flat; treat it as zero groups
            (PropositionsField::Flat(v), true) if v.is_empty() => {
                PropositionSet::grouped(Vec::<Vec<String>>::new()).map_err(wrap)
            }
            (PropositionsField::Flat(texts), false) => PropositionSet::ungrouped(texts).map_err(wrap),
            _ => Err(RecordError::ShapeMismatch { id: id() }),
        }
    }

    pub fn to_example(&self) -> Result<DatasetExample, RecordError> {
        let text = self.text.clone().ok_or_else(|| RecordError::MissingText { id: self.id.clone() })?;
        Ok(DatasetExample {
            passage: Passage::new(self.id.clone(), text),
            gold: self.propositions()?,
            meta: self.meta.clone(),
        })
    }

    pub fn from_example(example: &DatasetExample) -> Self {
        Self::from_parts(&example.passage.id, Some(&example.passage.text), &example.gold, example.meta.clone())
    }

    pub fn from_parts(id: &str, text: Option<&str>, props: &PropositionSet, meta: BTreeMap<String, String>) -> Self {
        let grouped = props.mode() == SetMode::Grouped;
        let propositions = if grouped {
            PropositionsField::Nested(
                props.groups().iter().map(|g| g.iter().map(|p| p.text().to_owned()).collect()).collect(),
            )
        } else {
            PropositionsField::Flat(props.texts().map(str::to_owned).collect())
        };
        ExampleRecord { id: id.to_owned(), text: text.map(str::to_owned), propositions, grouped, meta }
    }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let display = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| JsonlError::Io { path: display.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| JsonlError::Parse {
            path: display.clone(),
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

/// Writes `bytes` to a temporary sibling and renames it over `path`, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    write_atomic(path, to_jsonl(items).as_bytes())
        .map_err(|source| JsonlError::Io { path: path.display().to_string(), source })
}
