use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult};
use super::HarnessError;
use crate::corpus::{Corpus, Document};
use crate::explain::{
    check_constraints, Constraints, Direction, ExplainError, ExplanationRecord, Explanation, PhraseScorer, Violation,
};
use crate::mcts::{search_with_scorer, CoverageWindow, SearchConfig, SearchStats};

/// Per-document search seed, independent of processing order.
pub fn document_seed(seed: u64, doc_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(doc_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    /// Worker threads; 0 lets the pool choose.
    pub workers: usize,
    /// Free-form model description echoed in the report.
    pub model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextScore {
    #[serde(rename = "S")]
    pub stress: f64,
    #[serde(rename = "H")]
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub context: String,
    pub n_tokens: usize,
    pub seed: u64,
    /// Scores of the full text as a single phrase.
    pub original: TextScore,
    pub dependent: ExplanationRecord,
    pub dependent_window: CoverageWindow,
    pub dependent_stats: SearchStats,
    pub independent: ExplanationRecord,
    pub independent_window: CoverageWindow,
    pub independent_stats: SearchStats,
}

impl DocumentRecord {
    /// Constraint violations of both explanations, given each one's window.
    pub fn violations(&self, c: &Constraints) -> Result<Vec<(Direction, Violation)>, ExplainError> {
        let mut out = Vec::new();
        for (dir, rec, window) in [
            (Direction::Dependent, &self.dependent, self.dependent_window),
            (Direction::Independent, &self.independent, self.independent_window),
        ] {
            let expl = rec.explanation(self.n_tokens)?;
            for v in check_constraints(&expl, c) {
                let allowed = window == CoverageWindow::UpperOnly && matches!(v, Violation::CoverageBelowMin { .. });
                if !allowed {
                    out.push((dir, v));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDocument {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    #[serde(rename = "S")]
    pub stress: MeanStd,
    #[serde(rename = "H")]
    pub entropy: MeanStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n: usize,
    pub original: SeriesStats,
    pub dependent: SeriesStats,
    pub independent: SeriesStats,
}

impl Aggregates {
    pub fn from_records(records: &[DocumentRecord]) -> Option<Self> {
        if records.is_empty() {
            return None;
        }
        let series = |f: &dyn Fn(&DocumentRecord) -> (f64, f64)| {
            let (s, h): (Vec<f64>, Vec<f64>) = records.iter().map(f).unzip();
            SeriesStats {
                stress: MeanStd::of(&s),
                entropy: MeanStd::of(&h),
            }
        };
        Some(Self {
            n: records.len(),
            original: series(&|r| (r.original.stress, r.original.entropy)),
            dependent: series(&|r| (r.dependent.stress, r.dependent.entropy)),
            independent: series(&|r| (r.independent.stress, r.independent.entropy)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub model: String,
    pub alpha: f64,
    pub seed: u64,
    pub iterations: usize,
    pub c_puct: f64,
    pub constraints: Constraints,
    pub context_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ReportConfig,
    pub records: Vec<DocumentRecord>,
    pub skipped: Vec<SkippedDocument>,
    pub partial: bool,
    pub aggregates: Option<Aggregates>,
    /// Dependent vs independent entropy, paired by document.
    pub wilcoxon: Option<WilcoxonResult>,
    pub wilcoxon_note: Option<String>,
}

impl ExperimentReport {
    fn assemble(config: ReportConfig, records: Vec<DocumentRecord>, skipped: Vec<SkippedDocument>) -> Self {
        let dep: Vec<f64> = records.iter().map(|r| r.dependent.entropy).collect();
        let ind: Vec<f64> = records.iter().map(|r| r.independent.entropy).collect();
        let (wilcoxon, wilcoxon_note) = match wilcoxon_signed_rank(&dep, &ind, WilcoxonMethod::Auto) {
            Ok(w) => (Some(w), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            aggregates: Aggregates::from_records(&records),
            partial: !skipped.is_empty(),
            config,
            records,
            skipped,
            wilcoxon,
            wilcoxon_note,
        }
    }

    pub fn entropy_gap(&self) -> Option<f64> {
        self.aggregates
            .map(|a| a.independent.entropy.mean - a.dependent.entropy.mean)
    }

    /// Stress and entropy table: rows S and H, columns original, dependent, independent.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "model={} alpha={} seed={} iterations={} documents={} skipped={}",
            c.model,
            c.alpha,
            c.seed,
            c.iterations,
            self.records.len(),
            self.skipped.len()
        );
        let Some(a) = &self.aggregates else {
            out.push_str("no documents\n");
            return out;
        };
        let cell = |m: MeanStd| format!("{:.3} ± {:.3}", m.mean, m.std);
        let _ = writeln!(out, "{:<12}{:>18}{:>18}{:>18}", "", "Original", "Dependent", "Independent");
        let _ = writeln!(
            out,
            "{:<12}{:>18}{:>18}{:>18}",
            "Stress (S)",
            cell(a.original.stress),
            cell(a.dependent.stress),
            cell(a.independent.stress)
        );
        let _ = writeln!(
            out,
            "{:<12}{:>18}{:>18}{:>18}",
            "Entropy (H)",
            cell(a.original.entropy),
            cell(a.dependent.entropy),
            cell(a.independent.entropy)
        );
        match (&self.wilcoxon, &self.wilcoxon_note) {
            (Some(w), _) => {
                let _ = writeln!(out, "Wilcoxon signed-rank (dependent vs independent H): n={} p={:.3e}", w.n, w.p_value);
            }
            (None, Some(note)) => {
                let _ = writeln!(out, "Wilcoxon signed-rank: {note}");
            }
            (None, None) => {}
        }
        out
    }
}

struct DocOutcome {
    per_alpha: Vec<Result<DocumentRecord, SkippedDocument>>,
}

fn explain_document(doc: &Document, base: &SearchConfig, alphas: &[f64]) -> DocOutcome {
    let seed = document_seed(base.seed, &doc.id);
    let skip = |reason: String| SkippedDocument {
        doc_id: doc.id.clone(),
        reason,
    };
    // Predictions do not depend on alpha or direction, so one scorer serves all runs.
    let mut scorer = match PhraseScorer::new(doc, &base.reward) {
        Ok(s) => s,
        Err(e) => {
            return DocOutcome {
                per_alpha: alphas.iter().map(|_| Err(skip(e.to_string()))).collect(),
            }
        }
    };
    let original = if doc.n_tokens() == 0 {
        Err(skip("document has no tokens".into()))
    } else {
        scorer
            .stress_entropy(&Explanation::root(doc.n_tokens()))
            .map(|(stress, entropy)| TextScore { stress, entropy })
            .map_err(|e| skip(e.to_string()))
    };
    let per_alpha = alphas
        .iter()
        .map(|&alpha| {
            let original = original.clone()?;
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.reward.alpha = alpha;
            let dep_cfg = cfg.with_direction(Direction::Dependent);
            let ind_cfg = cfg.with_direction(Direction::Independent);
            let dep = search_with_scorer(doc, &dep_cfg, &mut scorer).map_err(|e| skip(e.to_string()))?;
            let ind = search_with_scorer(doc, &ind_cfg, &mut scorer).map_err(|e| skip(e.to_string()))?;
            Ok(DocumentRecord {
                doc_id: doc.id.clone(),
                context: doc.context.clone(),
                n_tokens: doc.n_tokens(),
                seed,
                original,
                dependent: ExplanationRecord::new(doc, &dep.best, &dep.score),
                dependent_window: dep.window,
                dependent_stats: dep.stats,
                independent: ExplanationRecord::new(doc, &ind.best, &ind.score),
                independent_window: ind.window,
                independent_stats: ind.stats,
            })
        })
        .collect();
    DocOutcome { per_alpha }
}

/// Dependent and independent explanations for every document, one report per alpha.
///
/// Documents are searched concurrently; results do not depend on the worker
/// count because each document's seed is derived from the global seed and its id.
pub fn run_experiment(
    corpus: &Corpus,
    base: &SearchConfig,
    alphas: &[f64],
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentReport>, HarnessError> {
    if alphas.is_empty() {
        return Err(HarnessError::BadConfig("no alpha values".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(HarnessError::BadConfig(format!("alpha must be finite and non-negative, got {a}")));
    }
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    let outcomes: Vec<DocOutcome> = pool.install(|| {
        corpus
            .documents
            .par_iter()
            .map(|doc| explain_document(doc, base, alphas))
            .collect()
    });

    let context_labels = base.reward.context_model.labels().to_vec();
    let reports = alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let mut records = Vec::new();
            let mut skipped = Vec::new();
            for outcome in &outcomes {
                match &outcome.per_alpha[k] {
                    Ok(r) => records.push(r.clone()),
                    Err(s) => {
                        log::warn!("alpha {alpha}: skipped {}: {}", s.doc_id, s.reason);
                        skipped.push(s.clone());
                    }
                }
            }
            let config = ReportConfig {
                model: opts.model.clone(),
                alpha,
                seed: base.seed,
                iterations: base.iterations,
                c_puct: base.c_puct,
                constraints: base.constraints,
                context_labels: context_labels.clone(),
            };
            ExperimentReport::assemble(config, records, skipped)
        })
        .collect();
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub n: usize,
    pub dependent_stress: f64,
    pub independent_stress: f64,
    /// Mean stress over both explanations of every document.
    pub explanation_stress: f64,
    pub dependent_entropy: f64,
    pub independent_entropy: f64,
    pub entropy_gap: f64,
    pub wilcoxon_p: Option<f64>,
}

/// One row per non-empty report, sorted by alpha.
pub fn sweep_summary(reports: &[ExperimentReport]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = reports
        .iter()
        .filter_map(|r| {
            let a = r.aggregates?;
            Some(SweepRow {
                alpha: r.config.alpha,
                n: a.n,
                dependent_stress: a.dependent.stress.mean,
                independent_stress: a.independent.stress.mean,
                explanation_stress: (a.dependent.stress.mean + a.independent.stress.mean) / 2.0,
                dependent_entropy: a.dependent.entropy.mean,
                independent_entropy: a.independent.entropy.mean,
                entropy_gap: a.independent.entropy.mean - a.dependent.entropy.mean,
                wilcoxon_p: r.wilcoxon.map(|w| w.p_value),
            })
        })
        .collect();
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_population() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn seeds_depend_on_id_and_seed() {
        assert_eq!(document_seed(1, "a"), document_seed(1, "a"));
        assert_ne!(document_seed(1, "a"), document_seed(1, "b"));
        assert_ne!(document_seed(1, "a"), document_seed(2, "a"));
    }
}
