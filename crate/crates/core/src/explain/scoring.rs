use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{phrase_text, Direction, ExplainError, Explanation, PhraseSpan, RewardConfig};
use crate::corpus::Document;
use crate::models::{prediction_entropy, Classifier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub stress: f64,
    pub entropy: f64,
    pub reward: f64,
    pub proportion: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

/// Scores explanations of one document, predicting each distinct phrase once.
///
/// Keys are token ranges, so a scorer must not be shared across documents
/// or across different model pairs.
pub struct PhraseScorer<'a> {
    doc: &'a Document,
    stress_model: &'a dyn Classifier,
    context_model: &'a dyn Classifier,
    positive: usize,
    /// span -> (p(stress = 1), context entropy)
    cache: HashMap<PhraseSpan, (f64, f64)>,
    stats: CacheStats,
}

impl<'a> PhraseScorer<'a> {
    pub fn new(doc: &'a Document, cfg: &'a RewardConfig) -> Result<Self, ExplainError> {
        cfg.validate()?;
        let positive = cfg
            .stress_model
            .label_index("1")
            .ok_or_else(|| ExplainError::BadReward("stress model lacks label 1".into()))?;
        Ok(Self {
            doc,
            stress_model: cfg.stress_model.as_ref(),
            context_model: cfg.context_model.as_ref(),
            positive,
            cache: HashMap::new(),
            stats: CacheStats::default(),
        })
    }

    pub fn document(&self) -> &'a Document {
        self.doc
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn cached_phrases(&self) -> usize {
        self.cache.len()
    }

    fn ensure(&mut self, spans: &[PhraseSpan]) -> Result<(), ExplainError> {
        let mut missing: Vec<PhraseSpan> = Vec::new();
        for span in spans {
            if self.cache.contains_key(span) || missing.contains(span) {
                self.stats.hits += 1;
            } else {
                self.stats.misses += 1;
                missing.push(*span);
            }
        }
        if missing.is_empty() {
            return Ok(());
        }
        let texts = missing
            .iter()
            .map(|s| phrase_text(self.doc, *s))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let stress = self.stress_model.predict_batch(&refs)?;
        let context = self.context_model.predict_batch(&refs)?;
        for ((span, s), c) in missing.into_iter().zip(stress).zip(context) {
            self.cache.insert(span, (s[self.positive], prediction_entropy(&c)));
        }
        Ok(())
    }

    /// Mean stress and mean context entropy over the phrases.
    pub fn stress_entropy(&mut self, expl: &Explanation) -> Result<(f64, f64), ExplainError> {
        if expl.spans().is_empty() {
            return Err(ExplainError::Empty);
        }
        self.ensure(expl.spans())?;
        let k = expl.spans().len() as f64;
        let (s, h) = expl
            .spans()
            .iter()
            .map(|span| self.cache[span])
            .fold((0.0, 0.0), |(s, h), (ps, ph)| (s + ps, h + ph));
        Ok((s / k, h / k))
    }

    pub fn score(&mut self, expl: &Explanation, alpha: f64, direction: Direction) -> Result<Score, ExplainError> {
        let (stress, entropy) = self.stress_entropy(expl)?;
        Ok(Score {
            stress,
            entropy,
            reward: stress + direction.sign() * alpha * entropy,
            proportion: expl.proportion(),
        })
    }
}
