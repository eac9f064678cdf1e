//! Single-file JSON persistence for in-process models.
//!
//! The model file references a sibling vocabulary term file by name.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::naive_bayes::{NaiveBayes, NbVariant};
use super::{check_label_count, ModelError, ModelKind, ProbModel};
use crate::textfeat::Vocabulary;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ModelKind,
    labels: Vec<String>,
    vocab_file: String,
    vocab_size: usize,
    params: Params,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Params {
    NaiveBayes {
        smoothing: f64,
        log_prior: Vec<f64>,
        feature_log_prob: Vec<Vec<f64>>,
    },
    Mlp {
        layer_sizes: Vec<usize>,
        l2: f64,
        params: Vec<f64>,
    },
}

fn vocab_path_for(model_path: &Path) -> PathBuf {
    let stem = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    model_path.with_file_name(format!("{stem}.vocab.txt"))
}

fn persist_err(e: impl std::fmt::Display) -> ModelError {
    ModelError::Persist(e.to_string())
}

/// Writes `path` (JSON) and `<stem>.vocab.txt` next to it.
pub fn save_model(model: &ProbModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let (vocab, params) = match model {
        ProbModel::NaiveBayes(nb) => (
            &nb.vocab,
            Params::NaiveBayes {
                smoothing: nb.smoothing,
                log_prior: nb.log_prior.clone(),
                feature_log_prob: nb.feature_log_prob.clone(),
            },
        ),
        ProbModel::Mlp(mlp) => (
            &mlp.vocab,
            Params::Mlp {
                layer_sizes: mlp.sizes.clone(),
                l2: mlp.l2,
                params: mlp.params.clone(),
            },
        ),
        ProbModel::External(_) => {
            return Err(ModelError::Persist("external scorers are not persisted".into()))
        }
    };
    let vocab_path = vocab_path_for(path);
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        kind: model.kind(),
        labels: crate::models::Classifier::labels(model).to_vec(),
        vocab_file: vocab_path
            .file_name()
            .expect("file name")
            .to_string_lossy()
            .into_owned(),
        vocab_size: vocab.len(),
        params,
    };
    vocab.save(&vocab_path)?;
    let json = serde_json::to_string(&file).map_err(persist_err)?;
    fs::write(path, json).map_err(persist_err)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ProbModel, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| persist_err(format!("{}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(persist_err)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(persist_err(format!(
            "format version {} unsupported (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    check_label_count(file.labels.len())?;
    let vocab = Vocabulary::load(path.with_file_name(&file.vocab_file))?;
    if vocab.len() != file.vocab_size {
        return Err(persist_err(format!(
            "vocabulary has {} terms, model expects {}",
            vocab.len(),
            file.vocab_size
        )));
    }
    let n_labels = file.labels.len();
    match (file.kind, file.params) {
        (
            kind @ (ModelKind::BernoulliNb | ModelKind::MultinomialNb),
            Params::NaiveBayes {
                smoothing,
                log_prior,
                feature_log_prob,
            },
        ) => {
            if log_prior.len() != n_labels
                || feature_log_prob.len() != n_labels
                || feature_log_prob.iter().any(|row| row.len() != vocab.len())
            {
                return Err(persist_err("naive Bayes parameter shapes do not match"));
            }
            let variant = if kind == ModelKind::BernoulliNb {
                NbVariant::Bernoulli
            } else {
                NbVariant::Multinomial
            };
            Ok(ProbModel::NaiveBayes(NaiveBayes::from_parts(
                variant,
                file.labels,
                vocab,
                smoothing,
                log_prior,
                feature_log_prob,
            )))
        }
        (
            ModelKind::Mlp,
            Params::Mlp {
                layer_sizes,
                l2,
                params,
            },
        ) => {
            let expected: usize = layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
            if layer_sizes.len() < 2
                || layer_sizes[0] != vocab.len()
                || *layer_sizes.last().expect("non-empty") != n_labels
                || params.len() != expected
            {
                return Err(persist_err("MLP parameter shapes do not match"));
            }
            Ok(ProbModel::Mlp(Mlp {
                labels: file.labels,
                vocab,
                sizes: layer_sizes,
                params,
                l2,
            }))
        }
        (kind, _) => Err(persist_err(format!("parameters do not match model kind {kind:?}"))),
    }
}
