//! Mini-batch SGD with AdaGrad step sizes, logistic loss and L2
//! regularization, plus a finite-difference gradient checker.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::corpus::{Label, LabeledDoc};
use crate::error::{Error, Result};
use crate::model::{sigmoid, Dims, ModelKind, SwiModel, DEFAULT_BUCKETS};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub t: usize,
    pub eta: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Hash buckets for Poly2 pair weights.
    pub buckets: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 10,
            t: 5,
            eta: 0.01,
            lambda: 1.0,
            batch_size: 32,
            max_epochs: 100,
            patience: 5,
            epsilon: 1e-8,
            seed: 0,
            buckets: DEFAULT_BUCKETS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return fail("eta must be positive");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return fail("lambda must be non-negative");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if self.k == 0 {
            return fail("k must be at least 1");
        }
        if self.t == 0 {
            return fail("t must be at least 1");
        }
        if self.buckets == 0 {
            return fail("bucket count must be at least 1");
        }
        Ok(())
    }

    pub fn dims(&self, kind: ModelKind, vocab_size: usize) -> Result<Dims> {
        Dims::for_kind(kind, vocab_size, self.k, self.t, self.buckets)
    }
}

/// Cross-entropy of `prob` against `label`, with `prob` clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn logistic_loss(prob: f64, label: Label) -> f64 {
    let p = prob.clamp(1e-12, 1.0 - 1e-12);
    match label {
        Label::Positive => -p.ln(),
        Label::Negative => -(1.0 - p).ln(),
    }
}

/// Dense buffer that remembers which entries were written.
#[derive(Debug, Clone)]
pub(crate) struct SparseAccumulator {
    values: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl SparseAccumulator {
    pub(crate) fn new(len: usize) -> Self {
        SparseAccumulator {
            values: vec![0.0; len],
            seen: vec![false; len],
            touched: Vec::new(),
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, idx: usize, value: f64) {
        if !self.seen[idx] {
            self.seen[idx] = true;
            self.touched.push(idx);
        }
        self.values[idx] += value;
    }

    fn add_row(&mut self, start: usize, row: &[f64], scale: f64) {
        for (l, v) in row.iter().enumerate() {
            self.add(start + l, scale * v);
        }
    }

    fn touched(&self) -> &[usize] {
        &self.touched
    }

    fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    fn clear(&mut self) {
        for &idx in &self.touched {
            self.values[idx] = 0.0;
            self.seen[idx] = false;
        }
        self.touched.clear();
    }

    fn to_sorted(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> =
            self.touched.iter().map(|&i| (i, self.values[i])).collect();
        out.sort_unstable_by_key(|&(i, _)| i);
        out
    }
}

/// Gradient of one example's loss plus L2 penalty, restricted to the
/// parameters the document touches. Entries are sorted by parameter index.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub entries: Vec<(usize, f64)>,
    pub loss: f64,
    pub prob: f64,
}

impl Gradient {
    pub fn get(&self, idx: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&idx, |&(i, _)| i)
            .ok()
            .map(|pos| self.entries[pos].1)
    }
}

/// Adds the data gradient `δ · ∂logit/∂θ` for every parameter in the
/// document's terms (bias, linear, factors, pairs), touching exactly the
/// parameters that appear in some term.
fn accumulate_data_gradient(
    model: &SwiModel,
    tokens: &[u32],
    delta: f64,
    acc: &mut SparseAccumulator,
) {
    acc.add(0, delta);
    for &w in tokens {
        acc.add(model.linear_index(w), delta);
    }
    let len = tokens.len();
    if len < 2 {
        return;
    }
    let k = model.dims().k;
    match model.kind() {
        ModelKind::Lr => {}
        ModelKind::Poly2 => {
            for i in 0..len {
                for j in i + 1..len {
                    acc.add(model.pair_index(tokens[i], tokens[j]), delta);
                }
            }
        }
        ModelKind::Fm => {
            let mut sum = vec![0.0; k];
            for &w in tokens {
                for (s, v) in sum.iter_mut().zip(model.row(w, 0)) {
                    *s += v;
                }
            }
            for &w in tokens {
                let start = model.factor_index(w, 0);
                for (l, v) in model.row(w, 0).iter().enumerate() {
                    acc.add(start + l, delta * (sum[l] - v));
                }
            }
        }
        ModelKind::Cfm | ModelKind::Pfm => {
            let positional = model.kind() == ModelKind::Pfm;
            for i in 0..len {
                for j in i + 1..model.window_end(i, len) {
                    let slot = if positional { j - i - 1 } else { 0 };
                    let (a, b) = (tokens[i], tokens[j]);
                    acc.add_row(model.factor_index(a, slot), model.row(b, slot), delta);
                    acc.add_row(model.factor_index(b, slot), model.row(a, slot), delta);
                }
            }
        }
    }
}

/// Gradient for one example into `acc`; returns `(loss, prob)`. The L2 term
/// `λθ` is added once for every touched parameter except the bias.
pub(crate) fn accumulate_example(
    model: &SwiModel,
    tokens: &[u32],
    label: Label,
    lambda: f64,
    acc: &mut SparseAccumulator,
) -> (f64, f64) {
    let logit = model
        .logit(tokens)
        .expect("tokens validated before training");
    let prob = sigmoid(logit);
    accumulate_data_gradient(model, tokens, prob - label.as_f64(), acc);
    if lambda != 0.0 {
        let params = model.params();
        for pos in 0..acc.touched().len() {
            let idx = acc.touched()[pos];
            if idx != 0 {
                acc.add(idx, lambda * params[idx]);
            }
        }
    }
    (logistic_loss(prob, label), prob)
}

pub fn compute_gradients(
    model: &SwiModel,
    tokens: &[u32],
    label: Label,
    lambda: f64,
) -> Result<Gradient> {
    model.check_tokens(tokens)?;
    let mut acc = SparseAccumulator::new(model.parameter_count());
    let (loss, prob) = accumulate_example(model, tokens, label, lambda, &mut acc);
    Ok(Gradient {
        entries: acc.to_sorted(),
        loss,
        prob,
    })
}

/// `G ← G + g²; θ ← θ − η / (√G + ε) · g`. Returns `(θ, G)`.
#[inline]
pub fn adagrad_update(param: f64, grad: f64, g_acc: f64, eta: f64, epsilon: f64) -> (f64, f64) {
    let g_next = g_acc + grad * grad;
    (param - eta / (g_next.sqrt() + epsilon) * grad, g_next)
}

/// Running sums of squared gradients, one per model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    pub sums: Vec<f64>,
}

impl AdaGradState {
    pub fn new(len: usize) -> Self {
        AdaGradState {
            sums: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], idx: usize, grad: f64, eta: f64, epsilon: f64) {
        let (p, g) = adagrad_update(params[idx], grad, self.sums[idx], eta, epsilon);
        params[idx] = p;
        self.sums[idx] = g;
    }

    pub fn effective_rate(&self, idx: usize, eta: f64, epsilon: f64) -> f64 {
        eta / (self.sums[idx].sqrt() + epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub valid_acc: Option<f64>,
}

impl EpochRecord {
    pub fn log_line(&self) -> String {
        match self.valid_acc {
            Some(acc) => format!(
                "epoch={} loss={:.6} valid_acc={:.6}",
                self.epoch, self.loss, acc
            ),
            None => format!("epoch={} loss={:.6} valid_acc=nan", self.epoch, self.loss),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.epochs).expect("history serializes")
    }

    pub fn best_valid_acc(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch).and_then(|e| e.valid_acc)
    }
}

fn accuracy(model: &SwiModel, docs: &[LabeledDoc]) -> f64 {
    let correct = docs
        .iter()
        .filter(|d| model.predict_positive(&d.tokens).expect("validated") == d.label.is_positive())
        .count();
    correct as f64 / docs.len() as f64
}

pub fn train(
    kind: ModelKind,
    vocab_size: usize,
    train: &[LabeledDoc],
    valid: &[LabeledDoc],
    config: &TrainConfig,
) -> Result<(SwiModel, TrainHistory)> {
    train_with_log(kind, vocab_size, train, valid, config, |_| {})
}

/// Trains a fresh model. Each epoch shuffles the training set, averages
/// per-example gradients over each mini-batch and applies AdaGrad updates to
/// the touched parameters. With a non-empty `valid` set, training stops once
/// validation accuracy has not improved for `patience` epochs and the best
/// epoch's parameters are returned; otherwise all `max_epochs` run and the
/// final parameters are returned.
pub fn train_with_log(
    kind: ModelKind,
    vocab_size: usize,
    train: &[LabeledDoc],
    valid: &[LabeledDoc],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(SwiModel, TrainHistory)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let positives = train.iter().filter(|d| d.label.is_positive()).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::SingleClass);
    }
    let mut model = SwiModel::init(
        kind,
        vocab_size,
        config.k,
        config.t,
        config.buckets,
        config.seed,
    )?;
    for doc in train.iter().chain(valid) {
        model.check_tokens(&doc.tokens)?;
    }

    let n_params = model.parameter_count();
    let mut state = AdaGradState::new(n_params);
    let mut example = SparseAccumulator::new(n_params);
    let mut batch = SparseAccumulator::new(n_params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = rng::stream(config.seed, "shuffle");

    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let scale = 1.0 / chunk.len() as f64;
            for &doc_idx in chunk {
                let doc = &train[doc_idx];
                let (loss, _) =
                    accumulate_example(&model, &doc.tokens, doc.label, config.lambda, &mut example);
                loss_sum += loss;
                for &idx in example.touched() {
                    batch.add(idx, scale * example.get(idx));
                }
                example.clear();
            }
            let params = model.params_mut();
            for &idx in batch.touched() {
                state.step(params, idx, batch.get(idx), config.eta, config.epsilon);
            }
            batch.clear();
        }

        let record = EpochRecord {
            epoch,
            loss: loss_sum / train.len() as f64,
            valid_acc: (!valid.is_empty()).then(|| accuracy(&model, valid)),
        };
        on_epoch(&record);
        history.epochs.push(record.clone());

        let Some(acc) = record.valid_acc else {
            history.best_epoch = epoch;
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, model.params().to_vec()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    if let Some((_, params)) = best {
        model.params_mut().copy_from_slice(&params);
    }
    Ok((model, history))
}

/// Loss plus `λ/2 · Σθ²` over the parameters the document touches (bias
/// excluded). Its gradient is what [`compute_gradients`] returns.
pub fn regularized_loss(
    model: &SwiModel,
    tokens: &[u32],
    label: Label,
    lambda: f64,
    touched: &[usize],
) -> Result<f64> {
    let prob = model.predict_prob(tokens)?;
    let params = model.params();
    let penalty: f64 = touched
        .iter()
        .filter(|&&i| i != 0)
        .map(|&i| params[i] * params[i])
        .sum();
    Ok(logistic_loss(prob, label) + 0.5 * lambda * penalty)
}

/// Maximum relative error between `gradient` and central differences of
/// [`regularized_loss`] over every parameter the gradient reports. The
/// relative error uses `max(|analytic|, |numeric|, 1e-8)` as denominator.
pub fn finite_diff_check_with(
    model: &SwiModel,
    tokens: &[u32],
    label: Label,
    lambda: f64,
    h: f64,
    gradient: impl Fn(&SwiModel, &[u32], Label, f64) -> Result<Gradient>,
) -> Result<f64> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(
            "perturbation must be positive".into(),
        ));
    }
    let analytic = gradient(model, tokens, label, lambda)?;
    let touched: Vec<usize> = analytic.entries.iter().map(|&(i, _)| i).collect();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for &(idx, grad) in &analytic.entries {
        let orig = probe.params()[idx];
        probe.params_mut()[idx] = orig + h;
        let up = regularized_loss(&probe, tokens, label, lambda, &touched)?;
        probe.params_mut()[idx] = orig - h;
        let down = regularized_loss(&probe, tokens, label, lambda, &touched)?;
        probe.params_mut()[idx] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = grad.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((grad - numeric).abs() / denom);
    }
    Ok(worst)
}

pub fn finite_diff_check(
    model: &SwiModel,
    tokens: &[u32],
    label: Label,
    lambda: f64,
    h: f64,
) -> Result<f64> {
    finite_diff_check_with(model, tokens, label, lambda, h, compute_gradients)
}

/// A small random problem for gradient checking.
#[derive(Debug, Clone)]
pub struct GradcheckInstance {
    pub model: SwiModel,
    pub tokens: Vec<u32>,
    pub label: Label,
    pub lambda: f64,
}

/// Random instance with vocabulary ≤ 6, 1 ≤ N_d ≤ 8, k ≤ 4, t ≤ 3 and
/// λ ∈ {0, 1}. All parameters are drawn from N(0, 0.5²) so every term of the
/// gradient is exercised.
pub fn random_instance(kind: ModelKind, rng: &mut rng::Rng) -> GradcheckInstance {
    let n = rng.random_range(2..=6);
    let k = rng.random_range(1..=4);
    let t = rng.random_range(1..=3);
    let buckets = rng.random_range(4..=32);
    let dims = Dims::for_kind(kind, n, k, t, buckets).expect("valid dims");
    let normal = Normal::new(0.0, 0.5).expect("valid normal");
    let mut model = SwiModel::zeros(kind, dims);
    for p in model.params_mut() {
        *p = normal.sample(rng);
    }
    let len = rng.random_range(1..=8);
    let tokens = (0..len).map(|_| rng.random_range(0..n as u32)).collect();
    GradcheckInstance {
        model,
        tokens,
        label: Label::from_bool(rng.random_bool(0.5)),
        lambda: if rng.random_bool(0.5) { 1.0 } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub kind: ModelKind,
    pub trials: usize,
    pub max_error: f64,
    pub worst_trial: usize,
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_PERTURBATION: f64 = 1e-4;

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_error <= GRADCHECK_TOLERANCE
    }
}

pub fn gradcheck_with(
    kind: ModelKind,
    trials: usize,
    seed: u64,
    gradient: impl Fn(&SwiModel, &[u32], Label, f64) -> Result<Gradient>,
) -> Result<GradcheckReport> {
    let mut rng = rng::stream(seed, "gradcheck");
    let mut report = GradcheckReport {
        kind,
        trials,
        max_error: 0.0,
        worst_trial: 0,
    };
    for trial in 0..trials {
        let inst = random_instance(kind, &mut rng);
        let err = finite_diff_check_with(
            &inst.model,
            &inst.tokens,
            inst.label,
            inst.lambda,
            DEFAULT_PERTURBATION,
            &gradient,
        )?;
        if err > report.max_error {
            report.max_error = err;
            report.worst_trial = trial;
        }
    }
    Ok(report)
}

pub fn gradcheck(kind: ModelKind, trials: usize, seed: u64) -> Result<GradcheckReport> {
    gradcheck_with(kind, trials, seed, compute_gradients)
}
