use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::explain::{Constraints, Explanation, PhraseSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    TrimFront,
    TrimBack,
    /// Remove one interior token, breaking the phrase in two.
    Split,
}

/// One edit of an explanation. Ordering is the deterministic action order:
/// phrase, then kind, then split offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub phrase_index: usize,
    pub kind: ActionKind,
    /// Offset within the phrase of the removed token (splits only; 0 otherwise).
    pub split_offset: usize,
}

impl Action {
    pub fn trim_front(phrase_index: usize) -> Self {
        Self {
            phrase_index,
            kind: ActionKind::TrimFront,
            split_offset: 0,
        }
    }

    pub fn trim_back(phrase_index: usize) -> Self {
        Self {
            phrase_index,
            kind: ActionKind::TrimBack,
            split_offset: 0,
        }
    }

    pub fn split(phrase_index: usize, split_offset: usize) -> Self {
        Self {
            phrase_index,
            kind: ActionKind::Split,
            split_offset,
        }
    }

    fn is_legal(&self, expl: &Explanation, c: &Constraints) -> bool {
        let Some(span) = expl.spans().get(self.phrase_index) else {
            return false;
        };
        match self.kind {
            ActionKind::TrimFront | ActionKind::TrimBack => {
                self.split_offset == 0 && span.length > c.n_length_min
            }
            ActionKind::Split => {
                let o = self.split_offset;
                expl.spans().len() < c.n_phrases_max
                    && o >= c.n_length_min
                    && o < span.length
                    && span.length - o - 1 >= c.n_length_min
            }
        }
    }

    /// Applies the edit without checking legality against constraints.
    pub(crate) fn apply_unchecked(&self, expl: &Explanation) -> Explanation {
        let mut spans: Vec<PhraseSpan> = expl.spans().to_vec();
        let span = spans[self.phrase_index];
        match self.kind {
            ActionKind::TrimFront => {
                spans[self.phrase_index] = PhraseSpan::new(span.start + 1, span.length - 1);
            }
            ActionKind::TrimBack => {
                spans[self.phrase_index] = PhraseSpan::new(span.start, span.length - 1);
            }
            ActionKind::Split => {
                let o = self.split_offset;
                spans[self.phrase_index] = PhraseSpan::new(span.start, o);
                spans.insert(
                    self.phrase_index + 1,
                    PhraseSpan::new(span.start + o + 1, span.length - o - 1),
                );
            }
        }
        Explanation::from_sorted_unchecked(expl.n_tokens(), spans)
    }
}

/// All legal edits, in action order.
pub fn legal_actions(expl: &Explanation, c: &Constraints) -> Vec<Action> {
    let can_split = expl.spans().len() < c.n_phrases_max;
    let mut out = Vec::new();
    for (i, span) in expl.spans().iter().enumerate() {
        if span.length > c.n_length_min {
            out.push(Action::trim_front(i));
            out.push(Action::trim_back(i));
        }
        if can_split && span.length > 2 * c.n_length_min {
            out.extend((c.n_length_min..span.length - c.n_length_min).map(|o| Action::split(i, o)));
        }
    }
    out
}

/// Number of legal actions, without materializing them.
pub fn count_legal_actions(expl: &Explanation, c: &Constraints) -> usize {
    let can_split = expl.spans().len() < c.n_phrases_max;
    expl.spans()
        .iter()
        .map(|s| {
            let trims = if s.length > c.n_length_min { 2 } else { 0 };
            let splits = if can_split {
                s.length.saturating_sub(2 * c.n_length_min)
            } else {
                0
            };
            trims + splits
        })
        .sum()
}

pub fn apply_action(expl: &Explanation, action: Action, c: &Constraints) -> Result<Explanation, SearchError> {
    if !action.is_legal(expl, c) {
        return Err(SearchError::IllegalAction(action));
    }
    Ok(action.apply_unchecked(expl))
}

/// No legal action remains, or coverage is at or below `r_min`.
pub fn is_terminal(expl: &Explanation, c: &Constraints) -> bool {
    expl.proportion() <= c.r_min || count_legal_actions(expl, c) == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constraints(n_phrases: usize, n_length: usize) -> Constraints {
        Constraints::new(n_phrases, n_length, 0.2, 0.5).unwrap()
    }

    fn expl(n: usize, spans: &[(usize, usize)]) -> Explanation {
        Explanation::new(n, spans.iter().map(|&(s, l)| PhraseSpan::new(s, l)).collect()).unwrap()
    }

    /// Brute-force legality: try every (phrase, kind, offset) and keep the ones
    /// whose result satisfies conditions a and b.
    fn enumerate_by_predicate(e: &Explanation, c: &Constraints) -> Vec<Action> {
        let mut out = Vec::new();
        for (i, span) in e.spans().iter().enumerate() {
            let mut candidates = vec![Action::trim_front(i), Action::trim_back(i)];
            candidates.extend((1..span.length.saturating_sub(1)).map(|o| Action::split(i, o)));
            for a in candidates {
                if span.length < 2 {
                    continue;
                }
                let next = a.apply_unchecked(e);
                let ok = next.spans().len() <= c.n_phrases_max
                    && next.spans().iter().all(|s| s.length >= c.n_length_min);
                if ok {
                    out.push(a);
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn twelve_token_phrase() {
        let c = constraints(3, 5);
        let e = expl(12, &[(0, 12)]);
        let actions = legal_actions(&e, &c);
        assert_eq!(
            actions,
            vec![
                Action::trim_front(0),
                Action::trim_back(0),
                Action::split(0, 5),
                Action::split(0, 6)
            ]
        );
        assert_eq!(actions, enumerate_by_predicate(&e, &c));
        assert_eq!(count_legal_actions(&e, &c), 4);
    }

    #[test]
    fn boundary_and_phrase_cap() {
        let c = constraints(3, 5);
        assert!(legal_actions(&expl(5, &[(0, 5)]), &c).is_empty());
        let three = expl(30, &[(0, 6), (10, 6), (20, 6)]);
        let actions = legal_actions(&three, &c);
        assert_eq!(actions.len(), 6);
        assert!(actions.iter().all(|a| a.kind != ActionKind::Split));
    }

    #[test]
    fn apply_examples() {
        let c = constraints(3, 5);
        let e = expl(12, &[(0, 12)]);
        let front = apply_action(&e, Action::trim_front(0), &c).unwrap();
        assert_eq!(front.spans(), &[PhraseSpan::new(1, 11)]);
        let split = apply_action(&e, Action::split(0, 5), &c).unwrap();
        assert_eq!(split.spans(), &[PhraseSpan::new(0, 5), PhraseSpan::new(6, 6)]);

        let fb = apply_action(&front, Action::trim_back(0), &c).unwrap();
        let back = apply_action(&e, Action::trim_back(0), &c).unwrap();
        let bf = apply_action(&back, Action::trim_front(0), &c).unwrap();
        assert_eq!(fb, bf);

        assert!(matches!(
            apply_action(&e, Action::split(0, 4), &c),
            Err(SearchError::IllegalAction(_))
        ));
        assert!(apply_action(&e, Action::trim_front(1), &c).is_err());
    }

    #[test]
    fn terminal_condition() {
        let c = constraints(3, 5);
        // r = 5/25 = 0.2 <= r_min
        assert!(is_terminal(&expl(25, &[(0, 5)]), &c));
        assert!(is_terminal(&expl(8, &[(0, 5)]), &c));
        assert!(!is_terminal(&expl(12, &[(0, 12)]), &c));
    }

    proptest! {
        #[test]
        fn legal_actions_match_predicate(
            n in 5usize..40,
            n_phrases in 1usize..4,
            n_length in 1usize..7,
            cuts in proptest::collection::vec(any::<u8>(), 0..6),
        ) {
            let c = Constraints::new(n_phrases, n_length, 0.0, 1.0).unwrap();
            // Build an arbitrary valid explanation from cut points.
            let mut points: Vec<usize> = cuts.iter().map(|x| *x as usize % (n + 1)).collect();
            points.push(0);
            points.push(n);
            points.sort();
            points.dedup();
            let spans: Vec<PhraseSpan> = points
                .windows(2)
                .step_by(2)
                .map(|w| PhraseSpan::new(w[0], w[1] - w[0]))
                .collect();
            let e = Explanation::new(n, spans).unwrap();
            let listed = legal_actions(&e, &c);
            prop_assert_eq!(listed.len(), count_legal_actions(&e, &c));
            prop_assert!(listed.windows(2).all(|w| w[0] < w[1]));
            if e.spans().iter().all(|s| s.length >= n_length) && e.spans().len() <= n_phrases {
                prop_assert_eq!(&listed, &enumerate_by_predicate(&e, &c));
            }
            for a in listed {
                let next = apply_action(&e, a, &c).unwrap();
                prop_assert_eq!(next.covered_tokens() + 1, e.covered_tokens());
            }
        }
    }
}
