//! Learned word-pair interactions: pair scores, ranked partners and
//! term-by-term explanations of a document's logit.
//!
//! Scores are raw dot products of SWI vectors. A positive score pushes the
//! logit toward the positive class whenever the pair co-occurs inside the
//! model's window; zero is neutral. For CFM and PFM, pairs that never
//! co-occurred in training keep scores near their initialization noise.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{Interaction, ModelKind, SwiModel};

#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub word_a: String,
    pub word_b: String,
    pub distance: Option<usize>,
    pub score: f64,
}

impl PairScore {
    pub fn tsv_row(&self) -> String {
        let distance = self
            .distance
            .map_or_else(|| "-".to_owned(), |d| d.to_string());
        format!(
            "{}\t{}\t{}\t{}",
            self.word_a, self.word_b, distance, self.score
        )
    }
}

pub fn to_tsv(scores: &[PairScore]) -> String {
    let mut out = String::new();
    for s in scores {
        let _ = writeln!(out, "{}", s.tsv_row());
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn score_ids(model: &SwiModel, a: u32, b: u32, distance: Option<usize>) -> Result<f64> {
    Ok(dot(model.factor(a, distance)?, model.factor(b, distance)?))
}

/// `⟨v_a, v_b⟩` for FM/CFM, `⟨v_{a,d}, v_{b,d}⟩` for PFM.
pub fn pair_score(
    model: &SwiModel,
    vocab: &Vocabulary,
    word_a: &str,
    word_b: &str,
    distance: Option<usize>,
) -> Result<PairScore> {
    let a = vocab.require(word_a)?;
    let b = vocab.require(word_b)?;
    Ok(PairScore {
        word_a: word_a.to_owned(),
        word_b: word_b.to_owned(),
        distance,
        score: score_ids(model, a, b, distance)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos" | "positive" => Ok(Direction::Positive),
            "neg" | "negative" => Ok(Direction::Negative),
            other => Err(Error::InvalidArgument(format!(
                "direction must be pos or neg, got {other:?}"
            ))),
        }
    }
}

/// Scores `word` against every vocabulary entry (itself included) and keeps
/// the `count` strongest in `direction`. Ties are ordered by word id.
pub fn top_interactions(
    model: &SwiModel,
    vocab: &Vocabulary,
    word: &str,
    count: usize,
    direction: Direction,
    distance: Option<usize>,
) -> Result<Vec<PairScore>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let id = vocab.require(word)?;
    let mut scored = Vec::with_capacity(vocab.len());
    for partner in 0..vocab.len() as u32 {
        scored.push((partner, score_ids(model, id, partner, distance)?));
    }
    scored.sort_by(|x, y| {
        let by_score = match direction {
            Direction::Positive => y.1.total_cmp(&x.1),
            Direction::Negative => x.1.total_cmp(&y.1),
        };
        by_score.then(x.0.cmp(&y.0))
    });
    scored.truncate(count);
    Ok(scored
        .into_iter()
        .map(|(partner, score)| PairScore {
            word_a: word.to_owned(),
            word_b: vocab.word(partner).expect("id in range").to_owned(),
            distance,
            score,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub logit: f64,
    pub bias: f64,
    /// `(word, occurrences · w_word)` per distinct word.
    pub linear: Vec<(u32, f64)>,
    pub interactions: Vec<Interaction>,
}

impl Explanation {
    pub fn interaction_total(&self) -> f64 {
        self.interactions.iter().map(|t| t.value).sum()
    }

    pub fn total(&self) -> f64 {
        self.bias + self.linear.iter().map(|(_, v)| v).sum::<f64>() + self.interaction_total()
    }

    /// `word_i<TAB>word_j<TAB>distance<TAB>value` rows for each interaction.
    pub fn to_tsv(&self, vocab: &Vocabulary, tokens: &[u32]) -> String {
        let word = |pos: usize| vocab.word(tokens[pos]).unwrap_or("?");
        let mut out = String::new();
        for t in &self.interactions {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                word(t.i),
                word(t.j),
                t.distance,
                t.value
            );
        }
        out
    }
}

/// Lists every term of the document's logit for a model with interactions.
pub fn explain(model: &SwiModel, tokens: &[u32]) -> Result<Explanation> {
    if model.kind() == ModelKind::Lr {
        return Err(Error::KindMismatch {
            expected: "fm, cfm, pfm or poly2",
            actual: ModelKind::Lr,
        });
    }
    let logit = model.logit_with_terms(tokens)?;
    let terms = logit.terms.expect("terms requested");
    Ok(Explanation {
        logit: logit.value,
        bias: terms.bias,
        linear: terms.linear,
        interactions: terms.interactions,
    })
}
