//! Model parameterizations and logits.
//!
//! Every kind shares one flat parameter vector laid out as
//! `[bias | linear (N) | factors | pair weights]`. Factors are `N × k` for FM
//! and CFM and `N × t × k` (row-major `[word][distance][dim]`) for PFM; pair
//! weights exist only for Poly2. Each token position carries feature value 1,
//! so interaction terms are plain dot products.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const INIT_STD: f64 = 0.01;
pub const DEFAULT_BUCKETS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Poly2,
    Fm,
    Cfm,
    Pfm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Lr,
        ModelKind::Poly2,
        ModelKind::Fm,
        ModelKind::Cfm,
        ModelKind::Pfm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Poly2 => "poly2",
            ModelKind::Fm => "fm",
            ModelKind::Cfm => "cfm",
            ModelKind::Pfm => "pfm",
        }
    }

    pub fn has_factors(self) -> bool {
        matches!(self, ModelKind::Fm | ModelKind::Cfm | ModelKind::Pfm)
    }

    pub fn is_windowed(self) -> bool {
        matches!(self, ModelKind::Cfm | ModelKind::Pfm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name().to_uppercase())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind {s:?}")))
    }
}

/// Shape of a model. Fields a kind does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub buckets: usize,
}

impl Dims {
    /// Validates the arguments for `kind` and zeroes the ones it ignores.
    pub fn for_kind(kind: ModelKind, n: usize, k: usize, t: usize, buckets: usize) -> Result<Dims> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{kind}: {msg}")));
        if n == 0 {
            return bad("vocabulary size must be at least 1");
        }
        if kind.has_factors() && k == 0 {
            return bad("k must be at least 1");
        }
        if kind.is_windowed() && t == 0 {
            return bad("t must be at least 1");
        }
        if kind == ModelKind::Poly2 && buckets == 0 {
            return bad("hash bucket count must be at least 1");
        }
        Ok(Dims {
            n,
            k: if kind.has_factors() { k } else { 0 },
            t: if kind.is_windowed() { t } else { 0 },
            buckets: if kind == ModelKind::Poly2 { buckets } else { 0 },
        })
    }

    /// Distance slices per word: `t` for PFM, one for FM and CFM.
    fn slots(&self, kind: ModelKind) -> usize {
        match kind {
            ModelKind::Pfm => self.t,
            ModelKind::Fm | ModelKind::Cfm => 1,
            ModelKind::Lr | ModelKind::Poly2 => 0,
        }
    }
}

/// Total parameter count for a kind: `N + 1` plus `N·k` (FM, CFM),
/// `N·t·k` (PFM) or `B` (Poly2).
pub fn parameter_count(kind: ModelKind, dims: &Dims) -> usize {
    1 + dims.n + dims.n * dims.slots(kind) * dims.k + dims.buckets
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One pairwise term of a logit. Positions index the encoded document and
/// `distance = j - i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub i: usize,
    pub j: usize,
    pub distance: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitTerms {
    pub bias: f64,
    /// `(word, occurrences · w_word)` per distinct word, in first-occurrence order.
    pub linear: Vec<(u32, f64)>,
    pub interactions: Vec<Interaction>,
}

impl LogitTerms {
    pub fn total(&self) -> f64 {
        self.bias
            + self.linear.iter().map(|(_, v)| v).sum::<f64>()
            + self.interactions.iter().map(|t| t.value).sum::<f64>()
    }
}

/// Pre-sigmoid score, optionally broken down term by term.
#[derive(Debug, Clone, PartialEq)]
pub struct Logit {
    pub value: f64,
    pub terms: Option<LogitTerms>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwiModel {
    kind: ModelKind,
    dims: Dims,
    params: Vec<f64>,
}

impl SwiModel {
    pub fn zeros(kind: ModelKind, dims: Dims) -> Self {
        SwiModel {
            kind,
            dims,
            params: vec![0.0; parameter_count(kind, &dims)],
        }
    }

    pub fn from_params(kind: ModelKind, dims: Dims, params: Vec<f64>) -> Result<Self> {
        let expected = parameter_count(kind, &dims);
        if params.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("non-finite parameter".into()));
        }
        Ok(SwiModel { kind, dims, params })
    }

    /// Zero bias and linear weights; factor entries and pair weights drawn
    /// from N(0, 0.01²) with the seeded `init` stream.
    pub fn init(
        kind: ModelKind,
        n: usize,
        k: usize,
        t: usize,
        buckets: usize,
        seed: u64,
    ) -> Result<Self> {
        let dims = Dims::for_kind(kind, n, k, t, buckets)?;
        let mut model = SwiModel::zeros(kind, dims);
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        let mut rng = rng::stream(seed, "init");
        let start = model.factor_offset();
        for p in &mut model.params[start..] {
            *p = normal.sample(&mut rng);
        }
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn vocab_size(&self) -> usize {
        self.dims.n
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn bias(&self) -> f64 {
        self.params[0]
    }

    pub fn set_bias(&mut self, value: f64) {
        self.params[0] = value;
    }

    #[inline]
    pub fn linear_index(&self, word: u32) -> usize {
        1 + word as usize
    }

    pub fn linear(&self, word: u32) -> f64 {
        self.params[self.linear_index(word)]
    }

    pub fn set_linear(&mut self, word: u32, value: f64) {
        let idx = self.linear_index(word);
        self.params[idx] = value;
    }

    #[inline]
    pub(crate) fn factor_offset(&self) -> usize {
        1 + self.dims.n
    }

    /// Number of factor entries (`N·k` or `N·t·k`).
    pub fn factor_len(&self) -> usize {
        self.dims.n * self.dims.slots(self.kind) * self.dims.k
    }

    #[inline]
    pub(crate) fn pair_offset(&self) -> usize {
        self.factor_offset() + self.factor_len()
    }

    /// Start of the factor row for `word` in distance slot `slot`
    /// (always 0 for FM and CFM, `distance - 1` for PFM).
    #[inline]
    pub fn factor_index(&self, word: u32, slot: usize) -> usize {
        let slots = self.dims.slots(self.kind);
        self.factor_offset() + (word as usize * slots + slot) * self.dims.k
    }

    #[inline]
    pub(crate) fn row(&self, word: u32, slot: usize) -> &[f64] {
        let start = self.factor_index(word, slot);
        &self.params[start..start + self.dims.k]
    }

    /// Maps an optional distance onto a factor slot, enforcing that PFM
    /// requires one in `1..=t` and FM/CFM reject it.
    pub fn slot_for(&self, distance: Option<usize>) -> Result<usize> {
        match (self.kind, distance) {
            (ModelKind::Pfm, Some(d)) if (1..=self.dims.t).contains(&d) => Ok(d - 1),
            (ModelKind::Pfm, Some(d)) => Err(Error::InvalidArgument(format!(
                "distance {d} outside 1..={}",
                self.dims.t
            ))),
            (ModelKind::Pfm, None) => Err(Error::InvalidArgument(
                "PFM factors are indexed by distance; one is required".into(),
            )),
            (ModelKind::Fm | ModelKind::Cfm, None) => Ok(0),
            (ModelKind::Fm | ModelKind::Cfm, Some(_)) => Err(Error::InvalidArgument(format!(
                "{} factors are not indexed by distance",
                self.kind
            ))),
            (kind, _) => Err(Error::InvalidArgument(format!(
                "{kind} has no factor vectors"
            ))),
        }
    }

    /// SWI vector of `word` (at `distance` for PFM).
    pub fn factor(&self, word: u32, distance: Option<usize>) -> Result<&[f64]> {
        self.check_word(word)?;
        let slot = self.slot_for(distance)?;
        Ok(self.row(word, slot))
    }

    pub fn set_factor(&mut self, word: u32, distance: Option<usize>, values: &[f64]) -> Result<()> {
        self.check_word(word)?;
        let slot = self.slot_for(distance)?;
        if values.len() != self.dims.k {
            return Err(Error::InvalidArgument(format!(
                "factor needs {} entries, got {}",
                self.dims.k,
                values.len()
            )));
        }
        let start = self.factor_index(word, slot);
        self.params[start..start + values.len()].copy_from_slice(values);
        Ok(())
    }

    /// Parameter index of the hashed weight for the unordered pair `{a, b}`.
    #[inline]
    pub fn pair_index(&self, a: u32, b: u32) -> usize {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let key = (u64::from(lo) << 32) | u64::from(hi);
        self.pair_offset() + (rng::mix64(key) % self.dims.buckets as u64) as usize
    }

    pub fn pair_weight(&self, a: u32, b: u32) -> f64 {
        self.params[self.pair_index(a, b)]
    }

    pub fn set_pair_weight(&mut self, a: u32, b: u32, value: f64) {
        let idx = self.pair_index(a, b);
        self.params[idx] = value;
    }

    fn check_word(&self, word: u32) -> Result<()> {
        if (word as usize) < self.dims.n {
            Ok(())
        } else {
            Err(Error::TokenOutOfRange {
                id: word,
                size: self.dims.n,
            })
        }
    }

    pub fn check_tokens(&self, tokens: &[u32]) -> Result<()> {
        tokens.iter().try_for_each(|&t| self.check_word(t))
    }

    /// Last partner position (exclusive) for position `i` in a document of
    /// length `len`.
    #[inline]
    pub(crate) fn window_end(&self, i: usize, len: usize) -> usize {
        match self.kind {
            ModelKind::Cfm | ModelKind::Pfm => (i + 1 + self.dims.t).min(len),
            _ => len,
        }
    }

    fn linear_sum(&self, tokens: &[u32]) -> f64 {
        tokens.iter().map(|&w| self.linear(w)).sum()
    }

    fn dot(&self, a: u32, b: u32, slot: usize) -> f64 {
        self.row(a, slot)
            .iter()
            .zip(self.row(b, slot))
            .map(|(x, y)| x * y)
            .sum()
    }

    /// Value of the interaction between positions `i < j`, or `None` when
    /// the pair lies outside the model's window.
    fn pair_term(&self, tokens: &[u32], i: usize, j: usize) -> Option<f64> {
        let distance = j - i;
        let (a, b) = (tokens[i], tokens[j]);
        match self.kind {
            ModelKind::Lr => None,
            ModelKind::Poly2 => Some(self.pair_weight(a, b)),
            ModelKind::Fm => Some(self.dot(a, b, 0)),
            ModelKind::Cfm if distance <= self.dims.t => Some(self.dot(a, b, 0)),
            ModelKind::Pfm if distance <= self.dims.t => Some(self.dot(a, b, distance - 1)),
            ModelKind::Cfm | ModelKind::Pfm => None,
        }
    }

    /// FM interaction sum through `((Σv)² − Σv²) / 2` per dimension.
    fn fm_interactions(&self, tokens: &[u32]) -> f64 {
        let k = self.dims.k;
        let mut sum = vec![0.0; k];
        let mut sum_sq = vec![0.0; k];
        for &w in tokens {
            for (l, &v) in self.row(w, 0).iter().enumerate() {
                sum[l] += v;
                sum_sq[l] += v * v;
            }
        }
        0.5 * sum.iter().zip(&sum_sq).map(|(s, q)| s * s - q).sum::<f64>()
    }

    fn windowed_interactions(&self, tokens: &[u32]) -> f64 {
        let mut total = 0.0;
        for i in 0..tokens.len() {
            for j in i + 1..self.window_end(i, tokens.len()) {
                total += self.pair_term(tokens, i, j).unwrap_or(0.0);
            }
        }
        total
    }

    fn interaction_sum(&self, tokens: &[u32]) -> f64 {
        match self.kind {
            ModelKind::Lr => 0.0,
            ModelKind::Fm => self.fm_interactions(tokens),
            ModelKind::Poly2 | ModelKind::Cfm | ModelKind::Pfm => {
                self.windowed_interactions(tokens)
            }
        }
    }

    /// Logit for an encoded document.
    pub fn logit(&self, tokens: &[u32]) -> Result<f64> {
        self.check_tokens(tokens)?;
        Ok(self.bias() + self.linear_sum(tokens) + self.interaction_sum(tokens))
    }

    /// Logit together with every term that makes it up.
    pub fn logit_with_terms(&self, tokens: &[u32]) -> Result<Logit> {
        let value = self.logit(tokens)?;
        let mut linear: Vec<(u32, f64)> = Vec::new();
        for &w in tokens {
            match linear.iter_mut().find(|(word, _)| *word == w) {
                Some(entry) => entry.1 += self.linear(w),
                None => linear.push((w, self.linear(w))),
            }
        }
        let mut interactions = Vec::new();
        for i in 0..tokens.len() {
            for j in i + 1..self.window_end(i, tokens.len()) {
                if let Some(value) = self.pair_term(tokens, i, j) {
                    interactions.push(Interaction {
                        i,
                        j,
                        distance: j - i,
                        value,
                    });
                }
            }
        }
        Ok(Logit {
            value,
            terms: Some(LogitTerms {
                bias: self.bias(),
                linear,
                interactions,
            }),
        })
    }

    pub fn predict_prob(&self, tokens: &[u32]) -> Result<f64> {
        self.logit(tokens).map(sigmoid)
    }

    pub fn predict_positive(&self, tokens: &[u32]) -> Result<bool> {
        self.predict_prob(tokens).map(|p| p >= 0.5)
    }
}

fn kind_logit(model: &SwiModel, kind: ModelKind, tokens: &[u32]) -> Result<Logit> {
    if model.kind != kind {
        return Err(Error::KindMismatch {
            expected: kind.name(),
            actual: model.kind,
        });
    }
    Ok(Logit {
        value: model.logit(tokens)?,
        terms: None,
    })
}

/// `w0 + Σ_positions w_token`.
pub fn lr_logit(model: &SwiModel, tokens: &[u32]) -> Result<Logit> {
    kind_logit(model, ModelKind::Lr, tokens)
}

/// Linear part plus the hashed weight of every position pair.
pub fn poly2_logit(model: &SwiModel, tokens: &[u32]) -> Result<Logit> {
    kind_logit(model, ModelKind::Poly2, tokens)
}

/// Linear part plus `⟨v_a, v_b⟩` over all position pairs, in `O(N_d·k)`.
pub fn fm_logit(model: &SwiModel, tokens: &[u32]) -> Result<Logit> {
    kind_logit(model, ModelKind::Fm, tokens)
}

/// Linear part plus `⟨v_a, v_b⟩` over pairs at most `t` positions apart.
pub fn cfm_logit(model: &SwiModel, tokens: &[u32]) -> Result<Logit> {
    kind_logit(model, ModelKind::Cfm, tokens)
}

/// Linear part plus `⟨v_{a,d}, v_{b,d}⟩` over pairs at distance `d ≤ t`.
pub fn pfm_logit(model: &SwiModel, tokens: &[u32]) -> Result<Logit> {
    kind_logit(model, ModelKind::Pfm, tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: ModelKind, n: usize, k: usize, t: usize) -> SwiModel {
        SwiModel::zeros(kind, Dims::for_kind(kind, n, k, t, 64).unwrap())
    }

    // a, b, c -> 0, 1, 2
    fn abc_factors(kind: ModelKind, t: usize) -> SwiModel {
        let mut m = model(kind, 3, 2, t);
        m.set_factor(0, None, &[1.0, 0.0]).unwrap();
        m.set_factor(1, None, &[1.0, 1.0]).unwrap();
        m.set_factor(2, None, &[0.0, 2.0]).unwrap();
        m
    }

    #[test]
    fn lr_examples() {
        let mut m = model(ModelKind::Lr, 2, 0, 0);
        assert_eq!(lr_logit(&m, &[0, 1, 1]).unwrap().value, 0.0);
        m.set_bias(0.1);
        m.set_linear(0, 0.5);
        assert!((lr_logit(&m, &[0, 0]).unwrap().value - 1.1).abs() < 1e-12);
        assert_eq!(lr_logit(&m, &[]).unwrap().value, 0.1);
        assert!(matches!(
            lr_logit(&m, &[2]),
            Err(Error::TokenOutOfRange { id: 2, size: 2 })
        ));
    }

    #[test]
    fn poly2_examples() {
        let mut m = model(ModelKind::Poly2, 3, 0, 0);
        m.set_linear(0, 0.25);
        assert_eq!(poly2_logit(&m, &[0, 1, 2]).unwrap().value, 0.25);
        assert_eq!(poly2_logit(&m, &[0]).unwrap().value, 0.25);
        m.set_linear(0, 0.0);
        let distinct: std::collections::HashSet<_> =
            [m.pair_index(0, 1), m.pair_index(1, 2), m.pair_index(0, 2)].into();
        assert_eq!(distinct.len(), 3, "test pairs must not collide");
        m.set_pair_weight(0, 1, 1.0);
        m.set_pair_weight(2, 1, -2.0);
        m.set_pair_weight(0, 2, 0.5);
        assert!((poly2_logit(&m, &[0, 1, 2]).unwrap().value + 0.5).abs() < 1e-12);
        assert_eq!(m.pair_index(3, 7), m.pair_index(7, 3));
    }

    #[test]
    fn fm_examples() {
        let m = abc_factors(ModelKind::Fm, 0);
        assert_eq!(fm_logit(&m, &[0, 1]).unwrap().value, 1.0);
        assert_eq!(fm_logit(&m, &[0, 1, 2]).unwrap().value, 3.0);
        assert_eq!(fm_logit(&m, &[]).unwrap().value, 0.0);
    }

    #[test]
    fn cfm_examples() {
        let m = abc_factors(ModelKind::Cfm, 1);
        assert_eq!(cfm_logit(&m, &[0, 1, 2]).unwrap().value, 3.0);
        let fm = abc_factors(ModelKind::Fm, 0);
        let wide = abc_factors(ModelKind::Cfm, 2);
        assert_eq!(
            cfm_logit(&wide, &[0, 1, 2]).unwrap().value,
            fm_logit(&fm, &[0, 1, 2]).unwrap().value
        );
        let mut single = model(ModelKind::Cfm, 3, 2, 4);
        single.set_bias(0.3);
        single.set_linear(0, 0.2);
        assert!((cfm_logit(&single, &[0]).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pfm_uses_distance_slices() {
        let mut m = model(ModelKind::Pfm, 3, 1, 2);
        // v_{word,d} = (10·word + d)
        for w in 0..3u32 {
            for d in 1..=2 {
                m.set_factor(w, Some(d), &[(10 * w as usize + d) as f64])
                    .unwrap();
            }
        }
        // <a1,b1> + <b1,c1> + <a2,c2> = 1·11 + 11·21 + 2·22
        let expected = 11.0 + 231.0 + 44.0;
        assert_eq!(pfm_logit(&m, &[0, 1, 2]).unwrap().value, expected);
    }

    #[test]
    fn kind_is_checked() {
        let m = model(ModelKind::Fm, 2, 2, 0);
        assert!(matches!(
            cfm_logit(&m, &[0]),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) - 0.95257).abs() < 1e-5);
        assert!((sigmoid(-3.0) - (1.0 - sigmoid(3.0))).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn init_shapes_and_determinism() {
        let fm = SwiModel::init(ModelKind::Fm, 100, 10, 5, 0, 3).unwrap();
        assert_eq!(fm.factor_len(), 1000);
        assert_eq!(fm.parameter_count(), 1101);
        let pfm = SwiModel::init(ModelKind::Pfm, 100, 10, 5, 0, 3).unwrap();
        assert_eq!(pfm.factor_len(), 5000);
        assert_eq!(pfm.parameter_count(), 5101);
        assert_eq!(
            pfm,
            SwiModel::init(ModelKind::Pfm, 100, 10, 5, 0, 3).unwrap()
        );
        assert_ne!(
            pfm,
            SwiModel::init(ModelKind::Pfm, 100, 10, 5, 0, 4).unwrap()
        );
        assert_eq!(pfm.bias(), 0.0);
        assert!((1..=100).all(|i| pfm.params()[i] == 0.0));
        assert!(SwiModel::init(ModelKind::Cfm, 10, 4, 0, 0, 0).is_err());
        assert!(SwiModel::init(ModelKind::Fm, 10, 0, 1, 0, 0).is_err());
        assert!(SwiModel::init(ModelKind::Lr, 0, 0, 0, 0, 0).is_err());
    }

    #[test]
    fn slot_rules() {
        let cfm = model(ModelKind::Cfm, 2, 2, 3);
        assert!(cfm.factor(0, Some(1)).is_err());
        let pfm = model(ModelKind::Pfm, 2, 2, 3);
        assert!(pfm.factor(0, None).is_err());
        assert!(pfm.factor(0, Some(4)).is_err());
        assert!(pfm.factor(0, Some(3)).is_ok());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("PFM".parse::<ModelKind>().unwrap(), ModelKind::Pfm);
        assert_eq!("poly2".parse::<ModelKind>().unwrap(), ModelKind::Poly2);
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
