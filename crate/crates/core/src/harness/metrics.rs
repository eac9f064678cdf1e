use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::Corpus;
use crate::models::{Classifier, Target};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Averaging {
    /// Scores for one positive label.
    Binary { positive: String },
    /// Unweighted mean of one-vs-rest scores over classes.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    /// Some precision, recall or F1 had a zero denominator and was set to 0.
    pub zero_division: bool,
}

fn ratio(num: usize, den: usize, zero: &mut bool) -> f64 {
    if den == 0 {
        *zero = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn one_vs_rest(truth: &[String], pred: &[String], label: &str, zero: &mut bool) -> ClassScores {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (t, p) in truth.iter().zip(pred) {
        match (t == label, p == label) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = ratio(tp, tp + fp, zero);
    let recall = ratio(tp, tp + fn_, zero);
    let f1 = if precision + recall == 0.0 {
        *zero = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassScores {
        label: label.to_string(),
        precision,
        recall,
        f1,
        support: tp + fn_,
    }
}

pub fn classification_metrics(
    truth: &[String],
    pred: &[String],
    averaging: &Averaging,
) -> Result<ClassificationReport, HarnessError> {
    if truth.len() != pred.len() {
        return Err(HarnessError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let mut labels: Vec<&String> = truth.iter().chain(pred).collect();
    labels.sort();
    labels.dedup();
    let mut zero = false;
    let per_class: Vec<ClassScores> = labels
        .iter()
        .map(|l| one_vs_rest(truth, pred, l, &mut zero))
        .collect();
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    let accuracy = correct as f64 / truth.len() as f64;

    let (precision, recall, f1, zero_division) = match averaging {
        Averaging::Binary { positive } => {
            let mut zero = false;
            let s = one_vs_rest(truth, pred, positive, &mut zero);
            (s.precision, s.recall, s.f1, zero)
        }
        Averaging::Macro => {
            let k = per_class.len() as f64;
            let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / k;
            (mean(|c| c.precision), mean(|c| c.recall), mean(|c| c.f1), zero)
        }
    };
    Ok(ClassificationReport {
        precision,
        recall,
        f1,
        accuracy,
        per_class,
        zero_division,
    })
}

/// Argmax label for each document, ties to the lowest label index.
pub fn predict_labels(model: &dyn Classifier, corpus: &Corpus) -> Result<Vec<String>, HarnessError> {
    let texts: Vec<String> = corpus.iter().map(|d| d.raw_text.clone()).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let probs = model.predict_batch(&refs)?;
    Ok(probs
        .iter()
        .map(|p| {
            let best = p
                .iter()
                .enumerate()
                .fold(0, |b, (i, &v)| if v > p[b] { i } else { b });
            model.labels()[best].clone()
        })
        .collect())
}

/// Scores `model` on `corpus`: binary on label "1" for stress, macro for context.
pub fn evaluate_classifier(
    model: &dyn Classifier,
    corpus: &Corpus,
    target: Target,
) -> Result<ClassificationReport, HarnessError> {
    let pred = predict_labels(model, corpus)?;
    let truth: Vec<String> = corpus.iter().map(|d| target.label_of(d)).collect();
    let averaging = match target {
        Target::Stress => Averaging::Binary {
            positive: "1".into(),
        },
        Target::Context => Averaging::Macro,
    };
    classification_metrics(&truth, &pred, &averaging)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn binary() -> Averaging {
        Averaging::Binary { positive: "1".into() }
    }

    #[test]
    fn perfect_predictions() {
        let t = labels(&["1", "0", "1", "0"]);
        let r = classification_metrics(&t, &t, &binary()).unwrap();
        assert_eq!((r.precision, r.recall, r.f1, r.accuracy), (1.0, 1.0, 1.0, 1.0));
        assert!(!r.zero_division);
    }

    #[test]
    fn binary_counts() {
        let t = labels(&["1", "1", "0", "0", "1"]);
        let p = labels(&["1", "0", "1", "0", "1"]);
        let r = classification_metrics(&t, &p, &binary()).unwrap();
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.accuracy - 0.6).abs() < 1e-12);
    }

    #[test]
    fn macro_average_and_zero_division() {
        let t = labels(&["a", "a", "b", "c"]);
        let p = labels(&["a", "b", "b", "b"]);
        let r = classification_metrics(&t, &p, &Averaging::Macro).unwrap();
        // a: P=1 R=1/2 F=2/3; b: P=1/3 R=1 F=1/2; c: P=0 (0/0) R=0 F=0
        assert!((r.precision - (1.0 + 1.0 / 3.0) / 3.0).abs() < 1e-12);
        assert!((r.recall - 0.5).abs() < 1e-12);
        assert!((r.f1 - (2.0 / 3.0 + 0.5) / 3.0).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.5);
        assert!(r.zero_division);
        assert_eq!(r.per_class.iter().map(|c| c.support).collect::<Vec<_>>(), vec![2, 1, 1]);
    }

    #[test]
    fn input_errors() {
        let t = labels(&["1"]);
        assert!(matches!(
            classification_metrics(&t, &[], &binary()),
            Err(HarnessError::LengthMismatch { left: 1, right: 0 })
        ));
        assert!(matches!(classification_metrics(&[], &[], &binary()), Err(HarnessError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn macro_invariant_under_relabeling(pairs in proptest::collection::vec((0u8..3, 0u8..3), 1..60)) {
            let names = ["x", "y", "z"];
            let renamed = ["q", "a", "m"];
            let t: Vec<String> = pairs.iter().map(|p| names[p.0 as usize].to_string()).collect();
            let p: Vec<String> = pairs.iter().map(|p| names[p.1 as usize].to_string()).collect();
            let t2: Vec<String> = pairs.iter().map(|p| renamed[p.0 as usize].to_string()).collect();
            let p2: Vec<String> = pairs.iter().map(|p| renamed[p.1 as usize].to_string()).collect();
            let a = classification_metrics(&t, &p, &Averaging::Macro).unwrap();
            let b = classification_metrics(&t2, &p2, &Averaging::Macro).unwrap();
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }

        #[test]
        fn binary_f1_is_harmonic_mean(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..60)) {
            let t: Vec<String> = pairs.iter().map(|p| p.0.to_string()).collect();
            let p: Vec<String> = pairs.iter().map(|p| p.1.to_string()).collect();
            let r = classification_metrics(&t, &p, &binary()).unwrap();
            if r.precision > 0.0 && r.recall > 0.0 {
                let h = 2.0 * r.precision * r.recall / (r.precision + r.recall);
                prop_assert!((r.f1 - h).abs() < 1e-9);
            }
            for v in [r.precision, r.recall, r.f1, r.accuracy] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
