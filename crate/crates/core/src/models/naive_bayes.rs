use serde::{Deserialize, Serialize};

use super::{check_label_count, softmax_in_place, Classifier, ModelError, Target};
use crate::corpus::Corpus;
use crate::textfeat::{fit_vocabulary, vectorize, CountVector, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NbVariant {
    Bernoulli,
    Multinomial,
}

/// Naive Bayes over count vectors with additive smoothing.
#[derive(Debug, Clone)]
pub struct NaiveBayes {
    pub(super) variant: NbVariant,
    pub(super) labels: Vec<String>,
    pub(super) vocab: Vocabulary,
    pub(super) smoothing: f64,
    pub(super) log_prior: Vec<f64>,
    /// `[class][term]` log-probability of the term (multinomial) or of its presence (Bernoulli).
    pub(super) feature_log_prob: Vec<Vec<f64>>,
    /// Bernoulli only: `[class][term]` of `ln(1 - p)`, plus its per-class sum.
    absent_log_prob: Vec<Vec<f64>>,
    absent_sum: Vec<f64>,
}

impl NaiveBayes {
    pub(super) fn from_parts(
        variant: NbVariant,
        labels: Vec<String>,
        vocab: Vocabulary,
        smoothing: f64,
        log_prior: Vec<f64>,
        feature_log_prob: Vec<Vec<f64>>,
    ) -> Self {
        let (absent_log_prob, absent_sum) = match variant {
            NbVariant::Multinomial => (Vec::new(), Vec::new()),
            NbVariant::Bernoulli => {
                let absent: Vec<Vec<f64>> = feature_log_prob
                    .iter()
                    .map(|row| row.iter().map(|lp| (-lp.exp()).ln_1p()).collect())
                    .collect();
                let sums = absent.iter().map(|row| row.iter().sum()).collect();
                (absent, sums)
            }
        };
        Self {
            variant,
            labels,
            vocab,
            smoothing,
            log_prior,
            feature_log_prob,
            absent_log_prob,
            absent_sum,
        }
    }

    pub fn variant(&self) -> NbVariant {
        self.variant
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    /// Unnormalized class log-joint scores for a count vector.
    pub fn joint_log_likelihood(&self, x: &CountVector) -> Vec<f64> {
        (0..self.labels.len())
            .map(|c| {
                let flp = &self.feature_log_prob[c];
                match self.variant {
                    NbVariant::Multinomial => {
                        self.log_prior[c]
                            + x.entries()
                                .iter()
                                .map(|&(t, n)| f64::from(n) * flp[t])
                                .sum::<f64>()
                    }
                    NbVariant::Bernoulli => {
                        let absent = &self.absent_log_prob[c];
                        self.log_prior[c]
                            + self.absent_sum[c]
                            + x.entries()
                                .iter()
                                .map(|&(t, _)| flp[t] - absent[t])
                                .sum::<f64>()
                    }
                }
            })
            .collect()
    }

    pub fn predict_vector(&self, x: &CountVector) -> Vec<f64> {
        let mut scores = self.joint_log_likelihood(x);
        softmax_in_place(&mut scores);
        scores
    }
}

impl Classifier for NaiveBayes {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, text: &str) -> Result<Vec<f64>, ModelError> {
        Ok(self.predict_vector(&vectorize(text, &self.vocab)))
    }
}

/// Fits a naive Bayes model with its own vocabulary fitted on `corpus`.
pub fn train_nb(
    corpus: &Corpus,
    target: Target,
    variant: NbVariant,
    smoothing: f64,
) -> Result<NaiveBayes, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let vocab = fit_vocabulary(corpus)?;
    let vectors: Vec<CountVector> = corpus
        .iter()
        .map(|d| vectorize(&d.raw_text, &vocab))
        .collect();
    let labels = target.label_universe(corpus);
    let targets: Vec<String> = corpus.iter().map(|d| target.label_of(d)).collect();
    train_nb_vectors(&vectors, &targets, labels, vocab, variant, smoothing)
}

pub(super) fn train_nb_vectors(
    vectors: &[CountVector],
    targets: &[String],
    labels: Vec<String>,
    vocab: Vocabulary,
    variant: NbVariant,
    smoothing: f64,
) -> Result<NaiveBayes, ModelError> {
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(ModelError::BadSmoothing(smoothing));
    }
    check_label_count(labels.len())?;
    let n_terms = vocab.len();
    let n_classes = labels.len();

    let mut doc_count = vec![0usize; n_classes];
    // Multinomial: term totals. Bernoulli: documents containing the term.
    let mut feature_count = vec![vec![0.0f64; n_terms]; n_classes];
    for (x, y) in vectors.iter().zip(targets) {
        let Some(c) = labels.iter().position(|l| l == y) else {
            continue;
        };
        doc_count[c] += 1;
        for &(t, n) in x.entries() {
            feature_count[c][t] += match variant {
                NbVariant::Multinomial => f64::from(n),
                NbVariant::Bernoulli => 1.0,
            };
        }
    }
    if let Some(c) = doc_count.iter().position(|&n| n == 0) {
        return Err(ModelError::EmptyClass(labels[c].clone()));
    }

    let n_docs: usize = doc_count.iter().sum();
    let log_prior = doc_count
        .iter()
        .map(|&n| (n as f64 / n_docs as f64).ln())
        .collect();
    let feature_log_prob = feature_count
        .iter()
        .zip(&doc_count)
        .map(|(counts, &nc)| {
            let denom = match variant {
                NbVariant::Multinomial => counts.iter().sum::<f64>() + smoothing * n_terms as f64,
                NbVariant::Bernoulli => nc as f64 + 2.0 * smoothing,
            };
            let log_denom = denom.ln();
            counts
                .iter()
                .map(|&k| (k + smoothing).ln() - log_denom)
                .collect()
        })
        .collect();
    Ok(NaiveBayes::from_parts(
        variant,
        labels,
        vocab,
        smoothing,
        log_prior,
        feature_log_prob,
    ))
}
