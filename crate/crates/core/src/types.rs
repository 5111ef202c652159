use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segment::split_sentences;

/// One sentence of a [`Passage`].
///
/// `span` is a byte range into the owning passage's text, so
/// `&passage.text[sentence.span.clone()] == sentence.text` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub span: Range<usize>,
}

/// Input text together with its sentence segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
}

impl Passage {
    /// Segments `text` with [`split_sentences`].
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let sentences = split_sentences(&text);
        Passage { id: id.into(), text, sentences }
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentence_texts(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropositionError {
    #[error("proposition text is empty")]
    Empty,
    #[error("group {group} holds a proposition attributed to sentence {found:?}")]
    MisattributedGroup { group: usize, found: Option<usize> },
}

/// A single proposition. Text is stored trimmed and is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Proposition {
    text: String,
    sentence_index: Option<usize>,
}

impl Proposition {
    pub fn new(text: impl AsRef<str>) -> Result<Self, PropositionError> {
        Self::build(text.as_ref(), None)
    }

    pub fn attributed(text: impl AsRef<str>, sentence_index: usize) -> Result<Self, PropositionError> {
        Self::build(text.as_ref(), Some(sentence_index))
    }

    fn build(text: &str, sentence_index: Option<usize>) -> Result<Self, PropositionError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(PropositionError::Empty);
        }
        Ok(Proposition { text: text.to_owned(), sentence_index })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sentence_index(&self) -> Option<usize> {
        self.sentence_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetMode {
    Ungrouped,
    Grouped,
}

/// Predicted or gold propositions.
///
/// An ungrouped set is stored as exactly one group whose members carry no
/// sentence index. In a grouped set, group `g` only holds propositions
/// attributed to sentence `g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropositionSet {
    mode: SetMode,
    groups: Vec<Vec<Proposition>>,
}

impl PropositionSet {
    pub fn ungrouped<I, S>(texts: I) -> Result<Self, PropositionError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let group = texts.into_iter().map(Proposition::new).collect::<Result<Vec<_>, _>>()?;
        Ok(PropositionSet { mode: SetMode::Ungrouped, groups: vec![group] })
    }

    pub fn grouped<G, I, S>(groups: G) -> Result<Self, PropositionError>
    where
        G: IntoIterator<Item = I>,
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let groups = groups
            .into_iter()
            .enumerate()
            .map(|(g, texts)| texts.into_iter().map(|t| Proposition::attributed(t, g)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PropositionSet { mode: SetMode::Grouped, groups })
    }

    /// Builds a grouped set from already-attributed propositions, checking
    /// that every member of group `g` is attributed to `g`.
    pub fn from_groups(groups: Vec<Vec<Proposition>>) -> Result<Self, PropositionError> {
        for (g, group) in groups.iter().enumerate() {
            if let Some(p) = group.iter().find(|p| p.sentence_index != Some(g)) {
                return Err(PropositionError::MisattributedGroup { group: g, found: p.sentence_index });
            }
        }
        Ok(PropositionSet { mode: SetMode::Grouped, groups })
    }

    pub fn mode(&self) -> SetMode {
        self.mode
    }

    pub fn groups(&self) -> &[Vec<Proposition>] {
        &self.groups
    }

    pub fn iter(&self) -> impl Iterator<Item = &Proposition> {
        self.groups.iter().flatten()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.iter().map(Proposition::text)
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops grouping, keeping proposition order.
    pub fn flattened(&self) -> PropositionSet {
        let group = self.iter().map(|p| Proposition { text: p.text.clone(), sentence_index: None }).collect();
        PropositionSet { mode: SetMode::Ungrouped, groups: vec![group] }
    }
}

/// Joins proposition texts with single spaces, in order.
pub fn concat_propositions(props: &PropositionSet) -> String {
    props.texts().collect::<Vec<_>>().join(" ")
}

/// A passage with its gold propositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetExample {
    pub passage: Passage,
    pub gold: PropositionSet,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl DatasetExample {
    pub fn id(&self) -> &str {
        &self.passage.id
    }
}
