//! Evaluation: classifier metrics, batch explanation experiments, paired
//! significance tests and histogram tables.

mod experiment;
mod histogram;
mod metrics;
mod wilcoxon;

use thiserror::Error;

use crate::mcts::SearchError;
use crate::models::ModelError;

pub use experiment::{
    document_seed, run_experiment, sweep_summary, Aggregates, DocumentRecord, ExperimentOptions, ExperimentReport,
    MeanStd, ReportConfig, SeriesStats, SkippedDocument, SweepRow, TextScore,
};
pub use histogram::{emit_histograms, Histogram, HistogramBin, Histograms};
pub use metrics::{classification_metrics, evaluate_classifier, predict_labels, Averaging, ClassScores, ClassificationReport};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N, MIN_PAIRS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("all paired differences are zero")]
    AllDifferencesZero,
    #[error("{n} nonzero differences; at least {} are required", MIN_PAIRS)]
    TooFewPairs { n: usize },
    #[error("non-finite value in paired samples")]
    NonFinite,
    #[error("bin count must be at least 1")]
    BadBins,
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}
