//! Explanations as sets of disjoint token spans, their interpretability
//! conditions, and their stress / context-entropy scores.

mod render;
mod scoring;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::models::{Classifier, ModelError};

pub use render::{render_ansi, render_html};
pub use scoring::{CacheStats, PhraseScorer, Score};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("span {span} out of range for {n_tokens} tokens")]
    SpanOutOfRange { span: PhraseSpan, n_tokens: usize },
    #[error("spans {0} and {1} overlap")]
    Overlap(PhraseSpan, PhraseSpan),
    #[error("explanation has no phrases")]
    Empty,
    #[error("invalid constraints: {0}")]
    BadConstraints(String),
    #[error("invalid reward config: {0}")]
    BadReward(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `length` contiguous display tokens starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhraseSpan {
    pub start: usize,
    pub length: usize,
}

impl PhraseSpan {
    pub fn new(start: usize, length: usize) -> Self {
        Self { start, length }
    }

    pub fn end(&self) -> usize {
        self.start + self.length
    }
}

impl fmt::Display for PhraseSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end())
    }
}

/// Disjoint spans over a document of `n_tokens` display tokens, sorted by start.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Explanation {
    n_tokens: usize,
    spans: Vec<PhraseSpan>,
}

impl Explanation {
    /// Canonicalizes (sorts) and validates a span set.
    pub fn new(n_tokens: usize, mut spans: Vec<PhraseSpan>) -> Result<Self, ExplainError> {
        spans.sort_unstable();
        for span in &spans {
            if span.length == 0 || span.end() > n_tokens {
                return Err(ExplainError::SpanOutOfRange {
                    span: *span,
                    n_tokens,
                });
            }
        }
        for pair in spans.windows(2) {
            if pair[0].end() > pair[1].start {
                return Err(ExplainError::Overlap(pair[0], pair[1]));
            }
        }
        Ok(Self { n_tokens, spans })
    }

    /// The whole text as one phrase.
    pub fn root(n_tokens: usize) -> Self {
        Self {
            n_tokens,
            spans: if n_tokens == 0 {
                Vec::new()
            } else {
                vec![PhraseSpan::new(0, n_tokens)]
            },
        }
    }

    pub(crate) fn from_sorted_unchecked(n_tokens: usize, spans: Vec<PhraseSpan>) -> Self {
        debug_assert!(Self::new(n_tokens, spans.clone()).is_ok_and(|e| e.spans == spans));
        Self { n_tokens, spans }
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn spans(&self) -> &[PhraseSpan] {
        &self.spans
    }

    pub fn covered_tokens(&self) -> usize {
        self.spans.iter().map(|s| s.length).sum()
    }

    /// Fraction of the document's tokens covered.
    pub fn proportion(&self) -> f64 {
        if self.n_tokens == 0 {
            return 0.0;
        }
        self.covered_tokens() as f64 / self.n_tokens as f64
    }
}

pub fn proportion_r(expl: &Explanation) -> f64 {
    expl.proportion()
}

/// Display tokens of `span` joined by single spaces.
pub fn phrase_text(doc: &Document, span: PhraseSpan) -> Result<String, ExplainError> {
    if span.length == 0 || span.end() > doc.n_tokens() {
        return Err(ExplainError::SpanOutOfRange {
            span,
            n_tokens: doc.n_tokens(),
        });
    }
    Ok(doc.display_tokens[span.start..span.end()].join(" "))
}

/// Interpretability conditions: phrase count cap, minimum phrase length, coverage window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub n_phrases_max: usize,
    pub n_length_min: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            n_phrases_max: 3,
            n_length_min: 5,
            r_min: 0.2,
            r_max: 0.5,
        }
    }
}

impl Constraints {
    pub fn new(
        n_phrases_max: usize,
        n_length_min: usize,
        r_min: f64,
        r_max: f64,
    ) -> Result<Self, ExplainError> {
        let c = Self {
            n_phrases_max,
            n_length_min,
            r_min,
            r_max,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.n_phrases_max == 0 || self.n_length_min == 0 {
            return Err(ExplainError::BadConstraints(
                "phrase count cap and minimum phrase length must be at least 1".into(),
            ));
        }
        if !(0.0 <= self.r_min && self.r_min <= self.r_max && self.r_max <= 1.0) {
            return Err(ExplainError::BadConstraints(format!(
                "need 0 <= r_min <= r_max <= 1, got r_min={} r_max={}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Violation {
    /// Condition a.
    TooManyPhrases { found: usize, max: usize },
    /// Condition b.
    PhraseTooShort { span: PhraseSpan, min: usize },
    /// Condition c, lower bound.
    CoverageBelowMin { r: f64, r_min: f64 },
    /// Condition c, upper bound.
    CoverageAboveMax { r: f64, r_max: f64 },
}

/// Every violated condition; empty when the explanation is interpretable.
pub fn check_constraints(expl: &Explanation, c: &Constraints) -> Vec<Violation> {
    let mut out = Vec::new();
    if expl.spans.len() > c.n_phrases_max {
        out.push(Violation::TooManyPhrases {
            found: expl.spans.len(),
            max: c.n_phrases_max,
        });
    }
    for span in &expl.spans {
        if span.length < c.n_length_min {
            out.push(Violation::PhraseTooShort {
                span: *span,
                min: c.n_length_min,
            });
        }
    }
    let r = expl.proportion();
    if r < c.r_min {
        out.push(Violation::CoverageBelowMin { r, r_min: c.r_min });
    }
    if r > c.r_max {
        out.push(Violation::CoverageAboveMax { r, r_max: c.r_max });
    }
    out
}

/// Sign of the entropy term in the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Low context entropy (`I = -1`).
    Dependent,
    /// High context entropy (`I = +1`).
    Independent,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Dependent => -1.0,
            Direction::Independent => 1.0,
        }
    }
}

/// Reward `S + I * alpha * H` and the two models behind it.
#[derive(Clone)]
pub struct RewardConfig {
    pub alpha: f64,
    pub direction: Direction,
    pub stress_model: Arc<dyn Classifier>,
    pub context_model: Arc<dyn Classifier>,
}

impl fmt::Debug for RewardConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardConfig")
            .field("alpha", &self.alpha)
            .field("direction", &self.direction)
            .field("stress_labels", &self.stress_model.labels())
            .field("context_labels", &self.context_model.labels())
            .finish()
    }
}

impl RewardConfig {
    pub fn new(
        alpha: f64,
        direction: Direction,
        stress_model: Arc<dyn Classifier>,
        context_model: Arc<dyn Classifier>,
    ) -> Result<Self, ExplainError> {
        let cfg = Self {
            alpha,
            direction,
            stress_model,
            context_model,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExplainError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ExplainError::BadReward(format!(
                "alpha must be a non-negative number, got {}",
                self.alpha
            )));
        }
        let mut stress_labels = self.stress_model.labels().to_vec();
        stress_labels.sort();
        if stress_labels != ["0", "1"] {
            return Err(ExplainError::BadReward(format!(
                "stress model labels must be {{0, 1}}, got {:?}",
                self.stress_model.labels()
            )));
        }
        if self.context_model.labels().len() < 2 {
            return Err(ExplainError::BadReward(
                "context model needs at least two labels".into(),
            ));
        }
        Ok(())
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        Self {
            direction,
            ..self.clone()
        }
    }

    pub fn combine(&self, stress: f64, entropy: f64) -> f64 {
        stress + self.direction.sign() * self.alpha * entropy
    }
}

/// Mean stress probability over the phrases.
pub fn stress_s(
    doc: &Document,
    expl: &Explanation,
    stress_model: &dyn Classifier,
) -> Result<f64, ExplainError> {
    if expl.spans.is_empty() {
        return Err(ExplainError::Empty);
    }
    let positive = stress_model
        .label_index("1")
        .ok_or_else(|| ExplainError::BadReward("stress model lacks label 1".into()))?;
    let mut total = 0.0;
    for span in &expl.spans {
        total += stress_model.predict(&phrase_text(doc, *span)?)?[positive];
    }
    Ok(total / expl.spans.len() as f64)
}

/// Mean context-prediction entropy (nats) over the phrases.
pub fn entropy_h(
    doc: &Document,
    expl: &Explanation,
    context_model: &dyn Classifier,
) -> Result<f64, ExplainError> {
    if expl.spans.is_empty() {
        return Err(ExplainError::Empty);
    }
    let mut total = 0.0;
    for span in &expl.spans {
        total += crate::models::prediction_entropy(&context_model.predict(&phrase_text(doc, *span)?)?);
    }
    Ok(total / expl.spans.len() as f64)
}

pub fn reward_r(doc: &Document, expl: &Explanation, cfg: &RewardConfig) -> Result<f64, ExplainError> {
    let s = stress_s(doc, expl, cfg.stress_model.as_ref())?;
    let h = entropy_h(doc, expl, cfg.context_model.as_ref())?;
    Ok(cfg.combine(s, h))
}

/// Machine-readable explanation with its scores and phrase strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub doc_id: String,
    pub spans: Vec<PhraseSpan>,
    #[serde(rename = "S")]
    pub stress: f64,
    #[serde(rename = "H")]
    pub entropy: f64,
    #[serde(rename = "R")]
    pub reward: f64,
    pub r: f64,
    pub phrases: Vec<String>,
}

impl ExplanationRecord {
    pub fn new(doc: &Document, expl: &Explanation, score: &Score) -> Self {
        Self {
            doc_id: doc.id.clone(),
            spans: expl.spans.clone(),
            stress: score.stress,
            entropy: score.entropy,
            reward: score.reward,
            r: score.proportion,
            phrases: expl
                .spans
                .iter()
                .map(|s| doc.display_tokens[s.start..s.end()].join(" "))
                .collect(),
        }
    }

    pub fn explanation(&self, n_tokens: usize) -> Result<Explanation, ExplainError> {
        Explanation::new(n_tokens, self.spans.clone())
    }
}
