//! Phrase-level explanations of stress predictions.
//!
//! Trains stress and context classifiers on a labeled post corpus, then uses
//! Monte Carlo tree search over sets of contiguous token spans to find short
//! explanations that keep the stress signal while either pinning down the
//! post's context (low context entropy) or staying context-neutral (high
//! context entropy).

pub mod corpus;
pub mod explain;
pub mod harness;
pub mod mcts;
pub mod models;
pub mod textfeat;
