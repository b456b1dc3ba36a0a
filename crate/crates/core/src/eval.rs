//! Classification metrics and the document/snippet evaluation protocol.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::corpus::{split, LabeledDoc, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{ModelKind, SwiModel};
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Confusion::default();
        for (predicted, actual) in pairs {
            match (predicted, actual) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// F1 of one class given its true positives, false positives and false
/// negatives. Zero when the class is neither predicted nor present.
fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Confusion,
    pub n_examples: usize,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Result<Self> {
        let n = confusion.total();
        if n == 0 {
            return Err(Error::Empty("evaluation set"));
        }
        let Confusion { tp, fp, tn, fn_ } = confusion;
        let positive = f1(tp, fp, fn_);
        let negative = f1(tn, fn_, fp);
        Ok(EvalReport {
            accuracy: (tp + tn) as f64 / n as f64,
            macro_f1: 0.5 * (positive + negative),
            confusion,
            n_examples: n,
        })
    }
}

/// Thresholds each document's probability at 0.5 and scores the result.
pub fn evaluate(model: &SwiModel, docs: &[LabeledDoc]) -> Result<EvalReport> {
    if docs.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut pairs = Vec::with_capacity(docs.len());
    for doc in docs {
        pairs.push((
            model.predict_positive(&doc.tokens)?,
            doc.label.is_positive(),
        ));
    }
    EvalReport::from_confusion(Confusion::from_pairs(pairs))
}

/// Which model scores the snippet set in each run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnippetTrain {
    /// The run's document model (trained on 70%, early-stopped on 10%).
    #[default]
    Split,
    /// A model retrained on every document for the document model's best
    /// epoch count.
    All,
}

impl FromStr for SnippetTrain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(SnippetTrain::Split),
            "all" => Ok(SnippetTrain::All),
            other => Err(Error::InvalidArgument(format!(
                "snippet training mode must be split or all, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSettings {
    pub config: TrainConfig,
    pub n_runs: usize,
    pub snippet_train: SnippetTrain,
}

impl ProtocolSettings {
    pub fn new(config: TrainConfig) -> Self {
        ProtocolSettings {
            config,
            n_runs: 5,
            snippet_train: SnippetTrain::Split,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub document: EvalReport,
    pub snippet: EvalReport,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        assert!(!values.is_empty(), "summary of no values");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary {
            mean,
            std,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub kind: ModelKind,
    pub runs: Vec<RunResult>,
    pub doc_acc: Summary,
    pub doc_f1: Summary,
    pub snip_acc: Summary,
    pub snip_f1: Summary,
}

impl ProtocolResult {
    fn from_runs(kind: ModelKind, runs: Vec<RunResult>) -> Self {
        let collect =
            |f: fn(&RunResult) -> f64| Summary::of(&runs.iter().map(f).collect::<Vec<_>>());
        ProtocolResult {
            kind,
            doc_acc: collect(|r| r.document.accuracy),
            doc_f1: collect(|r| r.document.macro_f1),
            snip_acc: collect(|r| r.snippet.accuracy),
            snip_f1: collect(|r| r.snippet.macro_f1),
            runs,
        }
    }
}

/// Seed of run `r`: the base seed offset by the run index.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_add(run as u64)
}

/// Document-level evaluation on seeded 70/10/20 splits, then snippet-level
/// evaluation of document-trained models, repeated `n_runs` times.
pub fn run_protocol(
    kind: ModelKind,
    vocab_size: usize,
    documents: &[LabeledDoc],
    snippets: &[LabeledDoc],
    settings: &ProtocolSettings,
) -> Result<ProtocolResult> {
    if documents.is_empty() {
        return Err(Error::Empty("document set"));
    }
    if snippets.is_empty() {
        return Err(Error::Empty("snippet set"));
    }
    if settings.n_runs == 0 {
        return Err(Error::InvalidArgument(
            "at least one run is required".into(),
        ));
    }
    let mut runs = Vec::with_capacity(settings.n_runs);
    for r in 0..settings.n_runs {
        let seed = run_seed(settings.config.seed, r);
        let parts = split(documents, &SplitSpec::standard(seed))?;
        let config = TrainConfig {
            seed,
            ..settings.config.clone()
        };
        let (model, history) = train(kind, vocab_size, &parts.train, &parts.valid, &config)?;
        let document = evaluate(&model, &parts.test)?;
        let snippet = match settings.snippet_train {
            SnippetTrain::Split => evaluate(&model, snippets)?,
            SnippetTrain::All => {
                let full = TrainConfig {
                    max_epochs: history.best_epoch + 1,
                    ..config
                };
                let (model, _) = train(kind, vocab_size, documents, &[], &full)?;
                evaluate(&model, snippets)?
            }
        };
        runs.push(RunResult {
            seed,
            document,
            snippet,
            best_epoch: history.best_epoch,
        });
    }
    Ok(ProtocolResult::from_runs(kind, runs))
}

/// Runs the protocol for each kind. All kinds see the same per-run splits.
pub fn compare_models(
    kinds: &[ModelKind],
    vocab_size: usize,
    documents: &[LabeledDoc],
    snippets: &[LabeledDoc],
    settings: &ProtocolSettings,
) -> Result<Vec<ProtocolResult>> {
    if kinds.is_empty() {
        return Err(Error::Empty("model list"));
    }
    kinds
        .iter()
        .map(|&kind| run_protocol(kind, vocab_size, documents, snippets, settings))
        .collect()
}

pub const CSV_HEADER: &str =
    "kind,doc_acc_mean,doc_acc_std,doc_f1_mean,doc_f1_std,snip_acc_mean,snip_acc_std,snip_f1_mean,snip_f1_std";

pub fn results_csv(results: &[ProtocolResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.kind.name(),
            r.doc_acc.mean,
            r.doc_acc.std,
            r.doc_f1.mean,
            r.doc_f1.std,
            r.snip_acc.mean,
            r.snip_acc.std,
            r.snip_f1.mean,
            r.snip_f1.std
        );
    }
    out
}

pub fn results_table(results: &[ProtocolResult]) -> String {
    let cell = |s: &Summary| format!("{:.3} ± {:.3}", s.mean, s.std);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} | {:^15} | {:^15} | {:^15} | {:^15}",
        "", "Document", "", "Snippet", ""
    );
    let _ = writeln!(
        out,
        "{:<6} | {:^15} | {:^15} | {:^15} | {:^15}",
        "Model", "Accuracy", "F1-Score", "Accuracy", "F1-Score"
    );
    let _ = writeln!(out, "{}", "-".repeat(6 + 4 * 18));
    for r in results {
        let _ = writeln!(
            out,
            "{:<6} | {:^15} | {:^15} | {:^15} | {:^15}",
            r.kind.to_string(),
            cell(&r.doc_acc),
            cell(&r.doc_f1),
            cell(&r.snip_acc),
            cell(&r.snip_f1)
        );
    }
    out
}
