//! Synthetic word-pair task: "hard" near "case" is positive, "hard" near
//! "push" is negative.
//!
//! Every document contains `hard`, `push` and `case` exactly once. One of
//! the two partners sits within [`NEAR`] positions of `hard` and the other
//! strictly farther away; the label says which partner is near. Documents
//! are generated in positive/negative twins that differ only by swapping
//! `case` and `push`, so every word has the same count distribution in both
//! classes and no bag-of-words rule can beat chance.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::corpus::{Label, LabeledDoc, Vocabulary};
use crate::rng;

pub const ANCHOR: &str = "hard";
pub const POSITIVE_PARTNER: &str = "case";
pub const NEGATIVE_PARTNER: &str = "push";
pub const FILLERS: [&str; 9] = [
    "the", "is", "very", "to", "it", "this", "so", "really", "button",
];
/// Largest distance at which a partner counts as co-occurring with the anchor.
pub const NEAR: usize = 3;

const MIN_LEN: usize = 8;
const MAX_LEN: usize = 12;

fn twin_docs(rng: &mut rng::Rng) -> [(Vec<&'static str>, Label); 2] {
    let len = rng.random_range(MIN_LEN..=MAX_LEN);
    let anchor = rng.random_range(0..len);
    let near: Vec<usize> = (0..len)
        .filter(|&p| p != anchor && p.abs_diff(anchor) <= NEAR)
        .collect();
    let far: Vec<usize> = (0..len).filter(|&p| p.abs_diff(anchor) > NEAR).collect();
    let near = *near.choose(rng).expect("len > NEAR");
    let far = *far.choose(rng).expect("len ≥ 2·NEAR + 2");

    let mut words: Vec<&'static str> = (0..len)
        .map(|_| *FILLERS.choose(rng).expect("fillers"))
        .collect();
    words[anchor] = ANCHOR;
    let mut positive = words.clone();
    positive[near] = POSITIVE_PARTNER;
    positive[far] = NEGATIVE_PARTNER;
    words[near] = NEGATIVE_PARTNER;
    words[far] = POSITIVE_PARTNER;
    [(positive, Label::Positive), (words, Label::Negative)]
}

/// `count` documents (rounded up to an even number) as word sequences.
pub fn generate_words(count: usize, seed: u64) -> Vec<(Vec<&'static str>, Label)> {
    let mut rng = rng::stream(seed, "pair-task");
    let mut docs = Vec::with_capacity(count + 1);
    while docs.len() < count {
        docs.extend(twin_docs(&mut rng));
    }
    docs
}

/// Accuracy of the best rule of the form "count(w) ≥ c ⇒ positive" (or its
/// negation), searched exhaustively over words and thresholds.
pub fn best_single_word_rule_accuracy(docs: &[LabeledDoc]) -> f64 {
    let mut counts: Vec<HashMap<u32, usize>> = Vec::with_capacity(docs.len());
    let mut max_count: HashMap<u32, usize> = HashMap::new();
    for doc in docs {
        let mut c = HashMap::new();
        for &w in &doc.tokens {
            *c.entry(w).or_insert(0) += 1;
        }
        for (&w, &n) in &c {
            let m = max_count.entry(w).or_insert(0);
            *m = (*m).max(n);
        }
        counts.push(c);
    }
    let mut best: f64 = 0.0;
    for (&word, &max) in &max_count {
        for threshold in 1..=max {
            let agree = docs
                .iter()
                .zip(&counts)
                .filter(|(d, c)| {
                    (c.get(&word).copied().unwrap_or(0) >= threshold) == d.label.is_positive()
                })
                .count();
            let acc = agree as f64 / docs.len() as f64;
            best = best.max(acc).max(1.0 - acc);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PairTask {
    pub vocab: Vocabulary,
    pub train: Vec<LabeledDoc>,
    pub valid: Vec<LabeledDoc>,
    pub test: Vec<LabeledDoc>,
}

impl PairTask {
    /// Independent train, validation and held-out sets drawn from one seed.
    pub fn generate(n_train: usize, n_valid: usize, n_test: usize, seed: u64) -> PairTask {
        let train_words = generate_words(n_train, rng::derive(seed, "train"));
        let valid_words = generate_words(n_valid, rng::derive(seed, "valid"));
        let test_words = generate_words(n_test, rng::derive(seed, "test"));
        let vocab = Vocabulary::build(
            &train_words
                .iter()
                .map(|(w, _)| w.clone())
                .collect::<Vec<_>>(),
            1,
        )
        .expect("non-empty");
        let encode = |docs: &[(Vec<&str>, Label)]| -> Vec<LabeledDoc> {
            docs.iter()
                .map(|(w, l)| LabeledDoc::new(vocab.encode(w), *l))
                .collect()
        };
        PairTask {
            train: encode(&train_words),
            valid: encode(&valid_words),
            test: encode(&test_words),
            vocab,
        }
    }

    pub fn standard(seed: u64) -> PairTask {
        PairTask::generate(400, 100, 400, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_the_near_partner() {
        for (words, label) in generate_words(200, 3) {
            assert!((MIN_LEN..=MAX_LEN).contains(&words.len()));
            let pos = |w: &str| {
                let found: Vec<usize> = (0..words.len()).filter(|&i| words[i] == w).collect();
                assert_eq!(found.len(), 1, "{w} must occur once");
                found[0]
            };
            let anchor = pos(ANCHOR);
            let case_near = pos(POSITIVE_PARTNER).abs_diff(anchor) <= NEAR;
            let push_near = pos(NEGATIVE_PARTNER).abs_diff(anchor) <= NEAR;
            assert_ne!(case_near, push_near);
            assert_eq!(case_near, label.is_positive());
        }
    }

    #[test]
    fn no_single_word_rule_beats_chance() {
        let task = PairTask::standard(0);
        assert_eq!(task.vocab.len(), 12);
        assert_eq!(task.train.len(), 400);
        assert!(best_single_word_rule_accuracy(&task.train) <= 0.55);
        assert!(best_single_word_rule_accuracy(&task.test) <= 0.55);
    }

    #[test]
    fn rule_search_finds_a_planted_rule() {
        let docs: Vec<_> = (0..20)
            .map(|i| {
                LabeledDoc::new(
                    if i % 2 == 0 { vec![0, 1] } else { vec![1] },
                    Label::from_bool(i % 2 == 0),
                )
            })
            .collect();
        assert_eq!(best_single_word_rule_accuracy(&docs), 1.0);
    }
}
