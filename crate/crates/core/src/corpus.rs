//! Labeled post corpus: CSV ingestion, validation, and filtering.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot open corpus file {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: unparseable stress value `{value}`")]
    BadStress { row: usize, value: String },
    #[error("row {row}: empty text")]
    EmptyText { row: usize },
    #[error("row {row}: missing field `{column}`")]
    MissingField { row: usize, column: String },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("unknown context label `{0}`")]
    UnknownContext(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One post with its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    /// Whitespace-delimited surface tokens; explanations index into these.
    pub display_tokens: Vec<String>,
    pub stress: u8,
    pub context: String,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        raw_text: impl Into<String>,
        stress: u8,
        context: impl Into<String>,
    ) -> Self {
        let raw_text = raw_text.into();
        let display_tokens = display_tokenize(&raw_text);
        Self {
            id: id.into(),
            raw_text,
            display_tokens,
            stress,
            context: context.into(),
        }
    }

    pub fn n_tokens(&self) -> usize {
        self.display_tokens.len()
    }

    /// Display tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.display_tokens.join(" ")
    }
}

pub fn display_tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub split: Split,
    pub context_universe: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, deriving the context universe (sorted) from the documents.
    pub fn from_documents(documents: Vec<Document>, split: Split) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        let context_universe = documents
            .iter()
            .map(|d| d.context.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self {
            documents,
            split,
            context_universe,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }
}

/// Column names and parsing policy for [`load_corpus`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub text_col: String,
    pub stress_col: String,
    pub context_col: String,
    pub split: Split,
    /// Also accept `-1` as the negative stress label.
    pub lenient_stress: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            text_col: "text".into(),
            stress_col: "label".into(),
            context_col: "subreddit".into(),
            split: Split::Train,
            lenient_stress: false,
        }
    }
}

impl LoadOptions {
    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }
}

fn parse_stress(value: &str, lenient: bool) -> Option<u8> {
    match value.trim() {
        "0" => Some(0),
        "1" => Some(1),
        "-1" if lenient => Some(0),
        _ => None,
    }
}

/// Loads a headered UTF-8 CSV. Rows keep file order; ids are `row-<index>`.
pub fn load_corpus(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_owned()))
    };
    let text_idx = column(&opts.text_col)?;
    let stress_idx = column(&opts.stress_col)?;
    let context_idx = column(&opts.context_col)?;

    let mut documents = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |idx: usize, name: &str| {
            record.get(idx).ok_or_else(|| CorpusError::MissingField {
                row,
                column: name.to_owned(),
            })
        };
        let text = field(text_idx, &opts.text_col)?;
        let stress_raw = field(stress_idx, &opts.stress_col)?;
        let context = field(context_idx, &opts.context_col)?;

        let stress =
            parse_stress(stress_raw, opts.lenient_stress).ok_or_else(|| CorpusError::BadStress {
                row,
                value: stress_raw.to_owned(),
            })?;
        let doc = Document::new(format!("row-{row}"), text, stress, context.trim());
        if doc.display_tokens.is_empty() {
            return Err(CorpusError::EmptyText { row });
        }
        documents.push(doc);
    }
    Corpus::from_documents(documents, opts.split)
}

/// Keeps documents whose context is in `contexts` and, if given, whose stress label matches.
/// The result's context universe is `contexts` in the requested order.
pub fn filter_corpus(
    corpus: &Corpus,
    contexts: &[String],
    stress: Option<u8>,
) -> Result<Corpus, CorpusError> {
    for c in contexts {
        if !corpus.context_universe.contains(c) {
            return Err(CorpusError::UnknownContext(c.clone()));
        }
    }
    let allowed: HashSet<&str> = contexts.iter().map(String::as_str).collect();
    let documents = corpus
        .documents
        .iter()
        .filter(|d| allowed.contains(d.context.as_str()))
        .filter(|d| stress.is_none_or(|s| d.stress == s))
        .cloned()
        .collect();
    let mut universe = Vec::with_capacity(contexts.len());
    for c in contexts {
        if !universe.contains(c) {
            universe.push(c.clone());
        }
    }
    Ok(Corpus {
        documents,
        split: corpus.split,
        context_universe: universe,
    })
}
