#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stress_explain::corpus::Document;
use stress_explain::explain::{
    reward_r, Constraints, Direction, Explanation, PhraseSpan, RewardConfig,
};
use stress_explain::models::{Classifier, ModelError};

/// p(stress = 1) is the fraction of tokens starting with `s`.
pub struct ToyStress;

impl Classifier for ToyStress {
    fn labels(&self) -> &[String] {
        static L: OnceLock<Vec<String>> = OnceLock::new();
        L.get_or_init(|| vec!["0".into(), "1".into()])
    }

    fn predict(&self, text: &str) -> Result<Vec<f64>, ModelError> {
        let toks: Vec<&str> = text.split(' ').collect();
        let p = toks.iter().filter(|t| t.starts_with('s')).count() as f64 / toks.len() as f64;
        Ok(vec![1.0 - p, p])
    }
}

/// Three contexts; each token starting with `a` or `b` adds weight to that
/// context, on top of a unit weight for every context.
pub struct ToyContext;

impl Classifier for ToyContext {
    fn labels(&self) -> &[String] {
        static L: OnceLock<Vec<String>> = OnceLock::new();
        L.get_or_init(|| vec!["a".into(), "b".into(), "c".into()])
    }

    fn predict(&self, text: &str) -> Result<Vec<f64>, ModelError> {
        let mut w = [1.0f64; 3];
        for t in text.split(' ') {
            if t.starts_with('a') {
                w[0] += 2.0;
            } else if t.starts_with('b') {
                w[1] += 2.0;
            }
        }
        let total: f64 = w.iter().sum();
        Ok(w.iter().map(|x| x / total).collect())
    }
}

pub fn toy_reward(alpha: f64, direction: Direction) -> RewardConfig {
    RewardConfig::new(alpha, direction, Arc::new(ToyStress), Arc::new(ToyContext)).unwrap()
}

/// Random document of `n` tokens over stress (`s*`), context (`a*`, `b*`)
/// and neutral (`n*`) words.
pub fn toy_document(id: &str, n: usize, rng: &mut ChaCha8Rng) -> Document {
    let toks: Vec<String> = (0..n)
        .map(|i| {
            let prefix = ["s", "a", "b", "n", "n"][rng.random_range(0..5)];
            format!("{prefix}{i}")
        })
        .collect();
    Document::new(id, toks.join(" "), 1, "a")
}

pub fn toy_documents(count: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(11..=15);
            toy_document(&format!("toy-{i}"), n, &mut rng)
        })
        .collect()
}

/// Every explanation satisfying the phrase cap, minimum phrase length and
/// coverage window.
pub fn enumerate_explanations(n_tokens: usize, c: &Constraints) -> Vec<Explanation> {
    fn rec(
        from: usize,
        n: usize,
        c: &Constraints,
        current: &mut Vec<PhraseSpan>,
        out: &mut Vec<Explanation>,
    ) {
        if !current.is_empty() {
            let covered: usize = current.iter().map(|s| s.length).sum();
            let r = covered as f64 / n as f64;
            if r >= c.r_min && r <= c.r_max {
                out.push(Explanation::new(n, current.clone()).unwrap());
            }
        }
        if current.len() == c.n_phrases_max {
            return;
        }
        for start in from..n {
            for length in c.n_length_min..=n - start {
                current.push(PhraseSpan::new(start, length));
                // Phrases must be separated by at least one token.
                rec(start + length + 1, n, c, current, out);
                current.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n_tokens, c, &mut Vec::new(), &mut out);
    out
}

/// Maximum reward over all explanations in the window, with its maximizers.
pub fn brute_force_best(doc: &Document, c: &Constraints, reward: &RewardConfig) -> (f64, Vec<Explanation>) {
    let mut best = f64::NEG_INFINITY;
    let mut argmax = Vec::new();
    for e in enumerate_explanations(doc.n_tokens(), c) {
        let r = reward_r(doc, &e, reward).unwrap();
        if r > best + 1e-12 {
            best = r;
            argmax = vec![e];
        } else if (r - best).abs() <= 1e-12 {
            argmax.push(e);
        }
    }
    (best, argmax)
}

const STRESS_WORDS: &[&str] = &["scared", "panic", "worried", "overwhelmed", "hopeless", "crying", "afraid", "exhausted"];
const CALM_WORDS: &[&str] = &["happy", "relaxed", "grateful", "fine", "enjoyed", "peaceful", "glad", "thanks"];
const CONTEXT_WORDS: &[(&str, &[&str])] = &[
    ("anxiety", &["heart", "racing", "attacks", "therapist", "meds", "breathing"]),
    ("assistance", &["rent", "landlord", "money", "bills", "job", "eviction"]),
    ("relationships", &["boyfriend", "girlfriend", "partner", "breakup", "dating", "married"]),
];
const FILLER: &[&str] = &["the", "and", "today", "really", "just", "week", "about", "because", "time", "things"];

/// Synthetic posts with stress words, context words and filler.
pub fn synthetic_documents(count: usize, seed: u64, prefix: &str) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (context, words) = CONTEXT_WORDS[i % CONTEXT_WORDS.len()];
            let stress = u8::from(rng.random_bool(0.5));
            let mood = if stress == 1 { STRESS_WORDS } else { CALM_WORDS };
            let n = rng.random_range(18..40);
            let toks: Vec<&str> = (0..n)
                .map(|_| match rng.random_range(0..10) {
                    0..=1 => mood[rng.random_range(0..mood.len())],
                    2..=3 => words[rng.random_range(0..words.len())],
                    _ => FILLER[rng.random_range(0..FILLER.len())],
                })
                .collect();
            Document::new(format!("{prefix}-{i}"), toks.join(" "), stress, context)
        })
        .collect()
}

/// Largest relative error between the analytic MLP gradient and central
/// finite differences, over every parameter of a small two-hidden-layer net.
pub fn mlp_gradient_max_rel_error() -> f64 {
    use stress_explain::models::Mlp;
    use stress_explain::textfeat::{vectorize, Vocabulary};

    let texts = ["red green blue", "green green yellow", "blue red red red", "yellow purple", "purple blue green"];
    let vocab = Vocabulary::fit(texts.iter().copied()).unwrap();
    let labels: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
    let mut mlp = Mlp::initialized(labels, vocab.clone(), &[6, 4], 1e-2, 3);
    let batch: Vec<_> = texts.iter().enumerate().map(|(i, t)| (vectorize(t, &vocab), i % 3)).collect();
    let (_, grad) = mlp.loss_and_gradient(&batch);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..grad.len() {
        let orig = mlp.params()[i];
        mlp.params_mut()[i] = orig + h;
        let up = mlp.loss(&batch);
        mlp.params_mut()[i] = orig - h;
        let down = mlp.loss(&batch);
        mlp.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let denom = grad[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((grad[i] - fd).abs() / denom);
    }
    worst
}

/// Largest absolute gap between trained naive Bayes posteriors and posteriors
/// computed by hand from raw token counts.
pub fn nb_hand_oracle_max_error() -> f64 {
    use std::collections::{HashMap, HashSet};
    use stress_explain::corpus::{Corpus, Split};
    use stress_explain::models::{train_nb, NbVariant, Target};

    let rows = [
        ("rent money worry worry", 1),
        ("panic money", 1),
        ("worry night", 1),
        ("calm night walk", 0),
        ("walk dog money", 0),
    ];
    let docs = rows
        .iter()
        .enumerate()
        .map(|(i, (t, s))| Document::new(format!("d{i}"), *t, *s, "c"))
        .collect();
    let corpus = Corpus::from_documents(docs, Split::Train).unwrap();
    let vocab: Vec<&str> = {
        let mut v: Vec<&str> = rows.iter().flat_map(|(t, _)| t.split(' ')).collect();
        v.sort();
        v.dedup();
        v
    };
    let queries = ["worry money", "walk walk night", "dog panic rent", "unknown"];
    let a = 1.0;
    let mut worst = 0.0f64;

    // Multinomial: p(w|c) = (count(w, c) + a) / (total(c) + a|V|).
    let mnb = train_nb(&corpus, Target::Stress, NbVariant::Multinomial, a).unwrap();
    for q in queries {
        let mut log_post = [0.0f64; 2];
        for c in 0..2u8 {
            let class_rows: Vec<&str> = rows.iter().filter(|r| r.1 == c).map(|r| r.0).collect();
            let mut counts: HashMap<&str, f64> = HashMap::new();
            for t in &class_rows {
                for w in t.split(' ') {
                    *counts.entry(w).or_default() += 1.0;
                }
            }
            let total: f64 = counts.values().sum();
            let mut lp = (class_rows.len() as f64 / rows.len() as f64).ln();
            for w in q.split(' ').filter(|w| vocab.contains(w)) {
                lp += ((counts.get(w).copied().unwrap_or(0.0) + a) / (total + a * vocab.len() as f64)).ln();
            }
            log_post[c as usize] = lp;
        }
        let p1 = 1.0 / (1.0 + (log_post[0] - log_post[1]).exp());
        worst = worst.max((mnb.predict(q).unwrap()[1] - p1).abs());
    }

    // Bernoulli: p(w|c) = (df(w, c) + a) / (N_c + 2a), absent words contribute 1 - p.
    let bnb = train_nb(&corpus, Target::Stress, NbVariant::Bernoulli, a).unwrap();
    for q in queries {
        let present: HashSet<&str> = q.split(' ').collect();
        let mut log_post = [0.0f64; 2];
        for c in 0..2u8 {
            let class_rows: Vec<HashSet<&str>> =
                rows.iter().filter(|r| r.1 == c).map(|r| r.0.split(' ').collect()).collect();
            let n_c = class_rows.len() as f64;
            let mut lp = (n_c / rows.len() as f64).ln();
            for w in &vocab {
                let df = class_rows.iter().filter(|s| s.contains(w)).count() as f64;
                let p = (df + a) / (n_c + 2.0 * a);
                lp += if present.contains(w) { p.ln() } else { (1.0 - p).ln() };
            }
            log_post[c as usize] = lp;
        }
        let p1 = 1.0 / (1.0 + (log_post[0] - log_post[1]).exp());
        worst = worst.max((bnb.predict(q).unwrap()[1] - p1).abs());
    }
    worst
}
