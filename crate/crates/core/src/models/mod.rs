//! Probabilistic text classifiers and the prediction-entropy helper.
//!
//! Every model maps a text to a probability distribution over an ordered label
//! universe. In-process models (naive Bayes, MLP) work on count vectors; the
//! external scorer delegates to another process over a JSON-lines protocol.

mod external;
mod mlp;
mod naive_bayes;
mod persist;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::textfeat::VocabError;

pub use external::{open_scorer, ExternalScorer, ScorerEndpoint, ScorerOptions, PROTOCOL_VERSION};
pub use mlp::{train_mlp, Mlp, MlpConfig};
pub use naive_bayes::{train_nb, NaiveBayes, NbVariant};
pub use persist::{load_model, save_model, MODEL_FORMAT_VERSION};

/// Tolerance for the sum-to-one check of distributions produced in process.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("class `{0}` has no training documents")]
    EmptyClass(String),
    #[error("need at least two labels, found {0}")]
    TooFewLabels(usize),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Vocabulary(#[from] VocabError),
    #[error("smoothing must be positive, got {0}")]
    BadSmoothing(f64),
    #[error("invalid MLP config: {0}")]
    BadConfig(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("scorer handshake failed: {0}")]
    Handshake(String),
    #[error("malformed scorer response: {0}")]
    Malformed(String),
    #[error("scorer distribution not normalized: {0}")]
    NotNormalized(String),
    #[error("scorer reported error: {0}")]
    Remote(String),
    #[error("scorer timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("scorer transport: {0}")]
    Transport(#[from] std::io::Error),
    #[error("scorer connection is unusable after an earlier failure")]
    Poisoned,
    #[error("model file: {0}")]
    Persist(String),
}

/// Which document label a classifier predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Stress,
    Context,
}

impl Target {
    pub fn label_of(self, doc: &Document) -> String {
        match self {
            Target::Stress => doc.stress.to_string(),
            Target::Context => doc.context.clone(),
        }
    }

    /// Stress labels are always `["0", "1"]`; context labels are the corpus universe.
    pub fn label_universe(self, corpus: &Corpus) -> Vec<String> {
        match self {
            Target::Stress => vec!["0".into(), "1".into()],
            Target::Context => {
                let present: BTreeSet<&str> = corpus.iter().map(|d| d.context.as_str()).collect();
                corpus
                    .context_universe
                    .iter()
                    .filter(|c| present.contains(c.as_str()))
                    .cloned()
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BernoulliNb,
    MultinomialNb,
    Mlp,
    External,
}

/// A text classifier returning a distribution over [`Classifier::labels`].
pub trait Classifier: Send + Sync {
    fn labels(&self) -> &[String];

    fn predict(&self, text: &str) -> Result<Vec<f64>, ModelError>;

    fn predict_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ModelError> {
        texts.iter().map(|t| self.predict(t)).collect()
    }

    fn label_index(&self, label: &str) -> Option<usize> {
        self.labels().iter().position(|l| l == label)
    }
}

/// A trained or connected classifier.
pub enum ProbModel {
    NaiveBayes(NaiveBayes),
    Mlp(Mlp),
    External(ExternalScorer),
}

impl ProbModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            ProbModel::NaiveBayes(nb) => match nb.variant() {
                NbVariant::Bernoulli => ModelKind::BernoulliNb,
                NbVariant::Multinomial => ModelKind::MultinomialNb,
            },
            ProbModel::Mlp(_) => ModelKind::Mlp,
            ProbModel::External(_) => ModelKind::External,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            ProbModel::NaiveBayes(m) => m,
            ProbModel::Mlp(m) => m,
            ProbModel::External(m) => m,
        }
    }
}

impl std::fmt::Debug for ProbModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProbModel")
            .field("kind", &self.kind())
            .field("labels", &self.labels())
            .finish()
    }
}

impl Classifier for ProbModel {
    fn labels(&self) -> &[String] {
        self.inner().labels()
    }

    fn predict(&self, text: &str) -> Result<Vec<f64>, ModelError> {
        self.inner().predict(text)
    }

    fn predict_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ModelError> {
        self.inner().predict_batch(texts)
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn prediction_entropy(dist: &[f64]) -> f64 {
    let h: f64 = dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.max(0.0)
}

/// Normalizes log-joint scores in place into probabilities.
pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

pub(crate) fn check_label_count(n: usize) -> Result<(), ModelError> {
    if n < 2 {
        Err(ModelError::TooFewLabels(n))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        let third = 1.0 / 3.0;
        assert!((prediction_entropy(&[third, third, third]) - 3f64.ln()).abs() < 1e-12);
        assert_eq!(prediction_entropy(&[1.0, 0.0, 0.0]), 0.0);
        assert!((prediction_entropy(&[0.5, 0.25, 0.25]) - 1.039_720_770_839_917_6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn entropy_bounded_and_permutation_invariant(raw in proptest::collection::vec(0.0f64..1.0, 2..6)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let dist: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let h = prediction_entropy(&dist);
            let k = dist.len() as f64;
            prop_assert!(h >= 0.0 && h <= k.ln() + 1e-12);
            let mut rev = dist.clone();
            rev.reverse();
            prop_assert!((prediction_entropy(&rev) - h).abs() < 1e-12);
            let uniform = vec![1.0 / k; dist.len()];
            prop_assert!(prediction_entropy(&uniform) >= h - 1e-12);
        }
    }

    #[test]
    fn softmax_normalizes_large_scores() {
        let mut s = vec![-1000.0, -1001.0, -2000.0];
        softmax_in_place(&mut s);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s[0] > s[1] && s[2] == 0.0);
    }
}
