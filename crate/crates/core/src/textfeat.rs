//! Classifier-side tokenization and bag-of-words count vectors.
//!
//! Terms are lowercased maximal runs of two or more word characters, with no
//! stop-word list, n-grams, or frequency cuts.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("corpus yields no terms")]
    Empty,
    #[error("vocabulary file: {0}")]
    Io(#[from] io::Error),
    #[error("vocabulary file line {line}: `{term}` is not a valid term")]
    InvalidTerm { line: usize, term: String },
    #[error("vocabulary file line {line}: terms not strictly sorted")]
    Unsorted { line: usize },
}

fn token_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"\w{2,}").expect("static pattern"))
}

/// Lowercases and extracts runs of at least two word characters, in order.
pub fn feat_tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    token_pattern()
        .find_iter(&lower)
        .map(|m| m.as_str().to_owned())
        .collect()
}

fn is_valid_term(term: &str) -> bool {
    token_pattern()
        .find(term)
        .is_some_and(|m| m.start() == 0 && m.end() == term.len())
        && term.to_lowercase() == term
}

/// Sorted term list with its inverse index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn fit<'a, I>(texts: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let terms: BTreeSet<String> = texts.into_iter().flat_map(feat_tokenize).collect();
        if terms.is_empty() {
            return Err(VocabError::Empty);
        }
        Ok(Self::from_sorted(terms.into_iter().collect()))
    }

    fn from_sorted(terms: Vec<String>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { terms, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// One term per line, sorted.
    pub fn to_lines(&self) -> String {
        let mut out = String::with_capacity(self.terms.iter().map(|t| t.len() + 1).sum());
        for t in &self.terms {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, VocabError> {
        let mut terms: Vec<String> = Vec::new();
        for (line, term) in text.lines().enumerate() {
            if !is_valid_term(term) {
                return Err(VocabError::InvalidTerm {
                    line: line + 1,
                    term: term.to_owned(),
                });
            }
            if terms.last().is_some_and(|prev| prev.as_str() >= term) {
                return Err(VocabError::Unsorted { line: line + 1 });
            }
            terms.push(term.to_owned());
        }
        if terms.is_empty() {
            return Err(VocabError::Empty);
        }
        Ok(Self::from_sorted(terms))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), VocabError> {
        fs::write(path, self.to_lines())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        Self::from_lines(&fs::read_to_string(path)?)
    }
}

pub fn fit_vocabulary(corpus: &Corpus) -> Result<Vocabulary, VocabError> {
    Vocabulary::fit(corpus.iter().map(|d| d.raw_text.as_str()))
}

/// Sparse term counts, sorted by column id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountVector {
    entries: Vec<(usize, u32)>,
    dim: usize,
}

impl CountVector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, column: usize) -> u32 {
        self.entries
            .binary_search_by_key(&column, |&(c, _)| c)
            .map_or(0, |i| self.entries[i].1)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for &(c, n) in &self.entries {
            dense[c] = f64::from(n);
        }
        dense
    }

    /// Elementwise sum of two vectors over the same vocabulary.
    pub fn add(&self, other: &CountVector) -> CountVector {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(self.nnz() + other.nnz());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            match (self.entries.get(i), other.entries.get(j)) {
                (Some(&(a, x)), Some(&(b, y))) if a == b => {
                    merged.push((a, x + y));
                    i += 1;
                    j += 1;
                }
                (Some(&(a, x)), Some(&(b, _))) if a < b => {
                    merged.push((a, x));
                    i += 1;
                }
                (Some(&(a, x)), None) => {
                    merged.push((a, x));
                    i += 1;
                }
                (_, Some(&(b, y))) => {
                    merged.push((b, y));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        CountVector {
            entries: merged,
            dim: self.dim,
        }
    }
}

/// Counts in-vocabulary terms of `text`; out-of-vocabulary terms are dropped.
pub fn vectorize(text: &str, vocab: &Vocabulary) -> CountVector {
    let lower = text.to_lowercase();
    let mut columns: Vec<usize> = token_pattern()
        .find_iter(&lower)
        .filter_map(|m| vocab.get(m.as_str()))
        .collect();
    columns.sort_unstable();
    let mut entries: Vec<(usize, u32)> = Vec::with_capacity(columns.len());
    for c in columns {
        match entries.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => entries.push((c, 1)),
        }
    }
    CountVector {
        entries,
        dim: vocab.len(),
    }
}
