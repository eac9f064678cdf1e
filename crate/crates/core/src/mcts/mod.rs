//! Monte Carlo tree search over explanations.
//!
//! The root is the whole text as a single phrase. Each edge removes one token
//! (trimming a phrase end or splitting a phrase at an interior token), so the
//! tree is acyclic and its depth is bounded by the token count.
//!
//! One simulation:
//! 1. descend from the root by PUCT (uniform priors) through nodes whose
//!    children have all been visited;
//! 2. at the first node with an unvisited action, take the first such action
//!    in action order;
//! 3. continue with uniformly random legal actions until a terminal node;
//! 4. back the terminal node's reward up every node on the path.
//!
//! Mean values are divided by the width of the reward's range before the
//! exploration term is added, unless `normalize_values` is off.
//!
//! Every node on the path, including the random continuation, becomes a tree
//! node with a cached reward. Explanations reached along different action
//! orders share one node, so the tree is a layered DAG: every path to a node
//! has the same length. The result is the best-reward node whose coverage
//! lies in `[r_min, r_max]`, or, if there is none, in `[0, r_max]`.

mod actions;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::explain::{
    Constraints, Direction, ExplainError, Explanation, PhraseScorer, RewardConfig, Score,
};

pub use actions::{apply_action, count_legal_actions, is_terminal, legal_actions, Action, ActionKind};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("document has {n_tokens} tokens, fewer than the minimum phrase length {min}")]
    DocumentTooShort { n_tokens: usize, min: usize },
    #[error("illegal action {0:?}")]
    IllegalAction(Action),
    #[error("no explanation in the search tree has coverage at most r_max ({stats:?})")]
    NoFeasibleExplanation { stats: SearchStats },
    #[error("scoring failed after {} simulations: {source}", stats.simulations)]
    Scoring {
        #[source]
        source: ExplainError,
        stats: SearchStats,
    },
    #[error("invalid search config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub iterations: usize,
    pub c_puct: f64,
    pub seed: u64,
    /// Divide mean values by the reward's range, `1 + alpha * ln K` for `K`
    /// contexts, before adding the exploration term, so the balance between
    /// exploration and exploitation does not depend on alpha.
    pub normalize_values: bool,
    pub constraints: Constraints,
    pub reward: RewardConfig,
}

impl SearchConfig {
    pub fn new(reward: RewardConfig) -> Self {
        Self {
            iterations: 2000,
            c_puct: 1.0,
            seed: 0,
            normalize_values: true,
            constraints: Constraints::default(),
            reward,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.iterations == 0 {
            return Err(SearchError::BadConfig("iterations must be at least 1".into()));
        }
        if !(self.c_puct > 0.0 && self.c_puct.is_finite()) {
            return Err(SearchError::BadConfig(format!(
                "exploration constant must be positive, got {}",
                self.c_puct
            )));
        }
        self.constraints
            .validate()
            .map_err(|e| SearchError::BadConfig(e.to_string()))?;
        self.reward
            .validate()
            .map_err(|e| SearchError::BadConfig(e.to_string()))
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        Self {
            reward: self.reward.with_direction(direction),
            ..self.clone()
        }
    }
}

/// Which coverage window the returned explanation was chosen from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageWindow {
    /// `r_min <= r <= r_max`
    Full,
    /// `r <= r_max`, used only when no node falls in the full window.
    UpperOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub simulations: usize,
    pub nodes: usize,
    pub nodes_expanded: usize,
    pub max_depth: usize,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Explanation,
    pub score: Score,
    pub window: CoverageWindow,
    pub stats: SearchStats,
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub expl: Explanation,
    pub visits: u32,
    pub value_sum: f64,
    pub score: Score,
    pub terminal: bool,
    pub depth: usize,
    n_legal: usize,
    /// Materialized children, sorted by action.
    children: Vec<(Action, usize)>,
}

impl SearchNode {
    pub fn mean_value(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.value_sum / f64::from(self.visits)
        }
    }

    pub fn children(&self) -> &[(Action, usize)] {
        &self.children
    }

    pub fn legal_action_count(&self) -> usize {
        self.n_legal
    }

    fn fully_expanded(&self) -> bool {
        self.children.len() == self.n_legal
    }
}

/// Search tree for one document and one reward.
pub struct SearchTree<'a> {
    doc: &'a Document,
    cfg: &'a SearchConfig,
    nodes: Vec<SearchNode>,
    index: HashMap<Explanation, usize>,
    rng: ChaCha8Rng,
    simulations: usize,
    value_scale: f64,
}

impl<'a> SearchTree<'a> {
    pub fn new(
        doc: &'a Document,
        cfg: &'a SearchConfig,
        scorer: &mut PhraseScorer<'_>,
    ) -> Result<Self, SearchError> {
        cfg.validate()?;
        let n = doc.n_tokens();
        if n == 0 || n < cfg.constraints.n_length_min {
            return Err(SearchError::DocumentTooShort {
                n_tokens: n,
                min: cfg.constraints.n_length_min,
            });
        }
        let mut tree = Self {
            doc,
            cfg,
            nodes: Vec::new(),
            index: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            simulations: 0,
            value_scale: if cfg.normalize_values { reward_range(&cfg.reward) } else { 1.0 },
        };
        tree.push_node(Explanation::root(n), 0, scorer)?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn simulations(&self) -> usize {
        self.simulations
    }

    fn push_node(
        &mut self,
        expl: Explanation,
        depth: usize,
        scorer: &mut PhraseScorer<'_>,
    ) -> Result<usize, SearchError> {
        let reward = &self.cfg.reward;
        let score = scorer
            .score(&expl, reward.alpha, reward.direction)
            .map_err(|source| SearchError::Scoring {
                source,
                stats: self.stats(scorer),
            })?;
        let c = &self.cfg.constraints;
        let n_legal = count_legal_actions(&expl, c);
        let terminal = n_legal == 0 || expl.proportion() <= c.r_min;
        self.index.insert(expl.clone(), self.nodes.len());
        self.nodes.push(SearchNode {
            expl,
            visits: 0,
            value_sum: 0.0,
            score,
            terminal,
            depth,
            n_legal,
            children: Vec::new(),
        });
        Ok(self.nodes.len() - 1)
    }

    /// Child of `parent` along `action`, linking an existing node for the same
    /// explanation or materializing a new one.
    fn child(
        &mut self,
        parent: usize,
        action: Action,
        scorer: &mut PhraseScorer<'_>,
    ) -> Result<usize, SearchError> {
        match self.nodes[parent]
            .children
            .binary_search_by(|(a, _)| a.cmp(&action))
        {
            Ok(i) => Ok(self.nodes[parent].children[i].1),
            Err(pos) => {
                let expl = action.apply_unchecked(&self.nodes[parent].expl);
                let id = match self.index.get(&expl) {
                    Some(&id) => id,
                    None => {
                        let depth = self.nodes[parent].depth + 1;
                        self.push_node(expl, depth, scorer)?
                    }
                };
                self.nodes[parent].children.insert(pos, (action, id));
                Ok(id)
            }
        }
    }

    fn first_unvisited_action(&self, node: usize) -> Action {
        let n = &self.nodes[node];
        let actions = legal_actions(&n.expl, &self.cfg.constraints);
        let mut materialized = n.children.iter().peekable();
        for a in actions {
            match materialized.peek() {
                Some((m, id)) if *m == a => {
                    if self.nodes[*id].visits == 0 {
                        return a;
                    }
                    materialized.next();
                }
                _ => return a,
            }
        }
        unreachable!("node has an unvisited action")
    }

    fn has_unvisited(&self, node: usize) -> bool {
        let n = &self.nodes[node];
        !n.fully_expanded() || n.children.iter().any(|(_, id)| self.nodes[*id].visits == 0)
    }

    fn select_child(&self, node: usize) -> usize {
        let parent = &self.nodes[node];
        let prior = 1.0 / parent.n_legal as f64;
        let sqrt_n = f64::from(parent.visits).sqrt();
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (_, id) in &parent.children {
            let child = &self.nodes[*id];
            let q = child.mean_value() / self.value_scale;
            let u = self.cfg.c_puct * prior * sqrt_n / (1.0 + f64::from(child.visits));
            let value = q + u;
            // Strict comparison keeps the lowest action on ties.
            if value > best.0 {
                best = (value, *id);
            }
        }
        best.1
    }

    /// Runs one simulation and returns the reward backed up along its path.
    pub fn simulate(&mut self, scorer: &mut PhraseScorer<'_>) -> Result<f64, SearchError> {
        let mut path = vec![0usize];
        let mut node = 0usize;
        loop {
            if self.nodes[node].terminal {
                break;
            }
            if self.has_unvisited(node) {
                let action = self.first_unvisited_action(node);
                node = self.child(node, action, scorer)?;
                path.push(node);
                while !self.nodes[node].terminal {
                    let actions = legal_actions(&self.nodes[node].expl, &self.cfg.constraints);
                    let action = actions[self.rng.random_range(0..actions.len())];
                    node = self.child(node, action, scorer)?;
                    path.push(node);
                }
                break;
            }
            node = self.select_child(node);
            path.push(node);
        }
        let reward = self.nodes[node].score.reward;
        for id in path {
            let n = &mut self.nodes[id];
            n.visits += 1;
            n.value_sum += reward;
        }
        self.simulations += 1;
        Ok(reward)
    }

    pub fn stats(&self, scorer: &PhraseScorer<'_>) -> SearchStats {
        let cache = scorer.stats();
        SearchStats {
            simulations: self.simulations,
            nodes: self.nodes.len(),
            nodes_expanded: self.nodes.iter().filter(|n| !n.children.is_empty()).count(),
            max_depth: self.nodes.iter().map(|n| n.depth).max().unwrap_or(0),
            cache_hits: cache.hits,
            cache_misses: cache.misses,
        }
    }

    /// Highest-reward node in the coverage window; earliest node wins ties.
    pub fn best(&self) -> Option<(usize, CoverageWindow)> {
        let c = &self.cfg.constraints;
        let pick = |lower: f64| {
            let mut best: Option<usize> = None;
            for (i, n) in self.nodes.iter().enumerate() {
                let r = n.score.proportion;
                if r < lower || r > c.r_max {
                    continue;
                }
                if best.is_none_or(|b| n.score.reward > self.nodes[b].score.reward) {
                    best = Some(i);
                }
            }
            best
        };
        if let Some(i) = pick(c.r_min) {
            return Some((i, CoverageWindow::Full));
        }
        pick(0.0).map(|i| (i, CoverageWindow::UpperOnly))
    }

    pub fn outcome(&self, scorer: &PhraseScorer<'_>) -> Result<SearchOutcome, SearchError> {
        let stats = self.stats(scorer);
        let (i, window) = self
            .best()
            .ok_or(SearchError::NoFeasibleExplanation { stats })?;
        if window == CoverageWindow::UpperOnly {
            log::warn!(
                "document {}: no explanation with coverage in [{}, {}]; using r <= {}",
                self.doc.id,
                self.cfg.constraints.r_min,
                self.cfg.constraints.r_max,
                self.cfg.constraints.r_max
            );
        }
        let node = &self.nodes[i];
        Ok(SearchOutcome {
            best: node.expl.clone(),
            score: node.score,
            window,
            stats,
        })
    }
}

/// Width of the reward's range: stress spans `[0, 1]` and the entropy term
/// spans `alpha * [0, ln K]`.
fn reward_range(reward: &RewardConfig) -> f64 {
    let k = reward.context_model.labels().len().max(1) as f64;
    1.0 + reward.alpha * k.ln()
}

/// Runs `cfg.iterations` simulations and returns the best explanation.
pub fn search(doc: &Document, cfg: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    let mut scorer = new_scorer(doc, cfg)?;
    search_with_scorer(doc, cfg, &mut scorer)
}

fn new_scorer<'a>(doc: &'a Document, cfg: &'a SearchConfig) -> Result<PhraseScorer<'a>, SearchError> {
    PhraseScorer::new(doc, &cfg.reward).map_err(|e| SearchError::BadConfig(e.to_string()))
}

/// As [`search`], reusing phrase predictions already held by `scorer`.
pub fn search_with_scorer(
    doc: &Document,
    cfg: &SearchConfig,
    scorer: &mut PhraseScorer<'_>,
) -> Result<SearchOutcome, SearchError> {
    let mut tree = SearchTree::new(doc, cfg, scorer)?;
    for _ in 0..cfg.iterations {
        tree.simulate(scorer)?;
    }
    tree.outcome(scorer)
}

#[derive(Debug, Clone)]
pub struct BothOutcomes {
    pub dependent: SearchOutcome,
    pub independent: SearchOutcome,
}

/// Context-dependent (`I = -1`) then context-independent (`I = +1`) search with
/// the same seed and constraints. Both searches share phrase predictions.
pub fn explain_both(doc: &Document, cfg_base: &SearchConfig) -> Result<BothOutcomes, SearchError> {
    let dep_cfg = cfg_base.with_direction(Direction::Dependent);
    let ind_cfg = cfg_base.with_direction(Direction::Independent);
    let mut scorer = new_scorer(doc, &dep_cfg)?;
    let dependent = search_with_scorer(doc, &dep_cfg, &mut scorer)?;
    let independent = search_with_scorer(doc, &ind_cfg, &mut scorer)?;
    Ok(BothOutcomes {
        dependent,
        independent,
    })
}
