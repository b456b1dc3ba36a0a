//! `swi` command-line interface.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags or arguments),
//! 2 for data or model errors, including a failed gradient check.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{self, LabeledDoc, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{self, ProtocolSettings, SnippetTrain};
use crate::inspect::{self, Direction};
use crate::model::{ModelKind, DEFAULT_BUCKETS};
use crate::model_file;
use crate::trainer::{self, GradcheckReport, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "swi",
    version,
    about = "Factorization machines for sentiment word interactions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a labeled TSV file
    Train(TrainArgs),
    /// Score a trained model on a labeled TSV file
    Eval(EvalArgs),
    /// Print positive-class probabilities for unlabeled text
    Predict(PredictArgs),
    /// Document-level then snippet-level evaluation over repeated runs
    Protocol(ProtocolArgs),
    /// Run the evaluation protocol for several model kinds on shared splits
    Compare(CompareArgs),
    /// Inspect learned word-pair interactions
    Inspect(InspectArgs),
    /// Check analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Factor dimension
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Context window size (CFM, PFM)
    #[arg(long, default_value_t = 5)]
    pub t: usize,
    /// Base learning rate
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    /// L2 regularization coefficient
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Mini-batch size
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Maximum number of epochs
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Hash buckets for Poly2 pair weights
    #[arg(long, default_value_t = DEFAULT_BUCKETS)]
    pub buckets: usize,
    /// Minimum training frequency for a word to enter the vocabulary
    #[arg(long, default_value_t = 2)]
    pub min_count: u64,
    /// Seed for every random stream
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl HyperArgs {
    pub fn config(&self) -> Result<TrainConfig> {
        let config = TrainConfig {
            k: self.k,
            t: self.t,
            eta: self.eta,
            lambda: self.lambda,
            batch_size: self.batch,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            buckets: self.buckets,
            ..TrainConfig::default()
        };
        config.validate()?;
        if self.min_count == 0 {
            return Err(Error::InvalidConfig("min-count must be at least 1".into()));
        }
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Model kind: lr, poly2, fm, cfm or pfm
    #[arg(long)]
    pub model: ModelKind,
    /// Training data (<text>\t<0|1> per line)
    #[arg(long)]
    pub train: PathBuf,
    /// Validation data used for early stopping
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Output model file; the vocabulary goes to <out>.vocab
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-epoch history as JSON
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model written by `swi train`; its .vocab file must sit beside it
    #[arg(long)]
    pub model_file: PathBuf,
    /// Labeled data (<text>\t<0|1> per line)
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model written by `swi train`; its .vocab file must sit beside it
    #[arg(long)]
    pub model_file: PathBuf,
    /// One text per line; a trailing tab-separated label is ignored. Reads
    /// standard input when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolData {
    /// Full labeled documents
    #[arg(long)]
    pub docs: PathBuf,
    /// Labeled snippets
    #[arg(long)]
    pub snippets: PathBuf,
    /// Number of seeded 70/10/20 runs
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Snippet model: the run's split-trained model, or one retrained on all documents
    #[arg(long, default_value = "split")]
    pub snippet_train: SnippetTrain,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Write results as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    /// Model kind: lr, poly2, fm, cfm or pfm
    #[arg(long)]
    pub model: ModelKind,
    #[command(flatten)]
    pub data: ProtocolData,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated model kinds
    #[arg(long, value_delimiter = ',', default_value = "lr,fm,cfm,pfm")]
    pub models: Vec<ModelKind>,
    #[command(flatten)]
    pub data: ProtocolData,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Model written by `swi train`; its .vocab file must sit beside it
    #[arg(long)]
    pub model_file: PathBuf,
    #[command(subcommand)]
    pub action: InspectAction,
}

#[derive(Debug, Subcommand)]
pub enum InspectAction {
    /// Score one word pair
    Pair {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Token distance (PFM only)
        #[arg(long)]
        dist: Option<usize>,
    },
    /// Rank a word's interaction partners
    Top {
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// pos or neg
        #[arg(long, default_value = "pos")]
        direction: Direction,
        /// Token distance (PFM only)
        #[arg(long)]
        dist: Option<usize>,
    },
    /// List every interaction term of a text's logit
    Explain {
        #[arg(long)]
        text: String,
    },
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Model kind: lr, poly2, fm, cfm or pfm
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn read_corpus(path: &Path) -> Result<Vec<(Vec<String>, corpus::Label)>> {
    Ok(corpus::tokenize_records(&corpus::load_tsv(path)?))
}

fn vocab_from(records: &[(Vec<String>, corpus::Label)], min_count: u64) -> Result<Vocabulary> {
    let texts: Vec<Vec<&str>> = records
        .iter()
        .map(|(tokens, _)| tokens.iter().map(String::as_str).collect())
        .collect();
    Vocabulary::build(&texts, min_count)
}

fn print_report(out: &mut dyn Write, prefix: &str, report: &eval::EvalReport) -> io::Result<()> {
    let c = report.confusion;
    writeln!(
        out,
        "{prefix}accuracy={:.6} macro_f1={:.6} tp={} fp={} tn={} fn={} n={}",
        report.accuracy, report.macro_f1, c.tp, c.fp, c.tn, c.fn_, report.n_examples
    )
}

fn io_out(e: io::Error) -> Error {
    Error::io("writing output", e)
}

fn cmd_train(args: TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let config = args.hyper.config()?;
    let records = read_corpus(&args.train)?;
    let valid_records = args.valid.as_deref().map(read_corpus).transpose()?;
    let vocab = vocab_from(&records, args.hyper.min_count)?;
    let train_docs = corpus::encode_records(&vocab, &records);
    let valid_docs = valid_records
        .map(|r| corpus::encode_records(&vocab, &r))
        .unwrap_or_default();

    let mut log_err = Ok(());
    let (model, history) = trainer::train_with_log(
        args.model,
        vocab.len(),
        &train_docs,
        &valid_docs,
        &config,
        |record| {
            if log_err.is_ok() {
                log_err = writeln!(out, "{}", record.log_line());
            }
        },
    )?;
    log_err.map_err(io_out)?;

    model_file::save(&args.out, &model, &vocab)?;
    if let Some(path) = &args.history {
        model_file::write_atomic(path, history.to_json().as_bytes())?;
    }
    writeln!(
        out,
        "best_epoch={} stopped_early={}",
        history.best_epoch, history.stopped_early
    )
    .map_err(io_out)?;
    let final_docs = if valid_docs.is_empty() {
        &train_docs
    } else {
        &valid_docs
    };
    let prefix = if valid_docs.is_empty() {
        "train "
    } else {
        "valid "
    };
    print_report(out, prefix, &eval::evaluate(&model, final_docs)?).map_err(io_out)?;
    Ok(EXIT_OK)
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let (model, vocab) = model_file::load(&args.model_file)?;
    let docs = corpus::encode_records(&vocab, &read_corpus(&args.data)?);
    print_report(out, "", &eval::evaluate(&model, &docs)?).map_err(io_out)?;
    Ok(EXIT_OK)
}

fn cmd_predict(args: PredictArgs, out: &mut dyn Write) -> Result<i32> {
    let (model, vocab) = model_file::load(&args.model_file)?;
    let text = match &args.input {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?,
        None => {
            let mut buf = String::new();
            for line in io::stdin().lock().lines() {
                buf.push_str(&line.map_err(|e| Error::io("reading standard input", e))?);
                buf.push('\n');
            }
            buf
        }
    };
    for line in text.lines() {
        let body = match line.rsplit_once('\t') {
            Some((body, label)) if corpus::Label::from_digit(label.trim()).is_some() => body,
            _ => line,
        };
        let tokens = vocab.encode(&corpus::tokenize(body));
        let prob = model.predict_prob(&tokens)?;
        writeln!(out, "{prob:.6}\t{}", u8::from(prob >= 0.5)).map_err(io_out)?;
    }
    Ok(EXIT_OK)
}

struct ProtocolInputs {
    vocab_size: usize,
    documents: Vec<LabeledDoc>,
    snippets: Vec<LabeledDoc>,
    settings: ProtocolSettings,
}

fn load_protocol(data: &ProtocolData) -> Result<ProtocolInputs> {
    let config = data.hyper.config()?;
    if data.runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    let doc_records = read_corpus(&data.docs)?;
    let snippet_records = read_corpus(&data.snippets)?;
    let vocab = vocab_from(&doc_records, data.hyper.min_count)?;
    Ok(ProtocolInputs {
        vocab_size: vocab.len(),
        documents: corpus::encode_records(&vocab, &doc_records),
        snippets: corpus::encode_records(&vocab, &snippet_records),
        settings: ProtocolSettings {
            config,
            n_runs: data.runs,
            snippet_train: data.snippet_train,
        },
    })
}

fn emit_results(
    data: &ProtocolData,
    results: &[eval::ProtocolResult],
    out: &mut dyn Write,
) -> Result<i32> {
    if let Some(path) = &data.csv {
        model_file::write_atomic(path, eval::results_csv(results).as_bytes())?;
    }
    write!(out, "{}", eval::results_table(results)).map_err(io_out)?;
    Ok(EXIT_OK)
}

fn cmd_protocol(args: ProtocolArgs, out: &mut dyn Write) -> Result<i32> {
    let inputs = load_protocol(&args.data)?;
    let result = eval::run_protocol(
        args.model,
        inputs.vocab_size,
        &inputs.documents,
        &inputs.snippets,
        &inputs.settings,
    )?;
    emit_results(&args.data, &[result], out)
}

fn cmd_compare(args: CompareArgs, out: &mut dyn Write) -> Result<i32> {
    if args.models.is_empty() {
        return Err(Error::InvalidArgument(
            "--models must name at least one kind".into(),
        ));
    }
    let inputs = load_protocol(&args.data)?;
    let results = eval::compare_models(
        &args.models,
        inputs.vocab_size,
        &inputs.documents,
        &inputs.snippets,
        &inputs.settings,
    )?;
    emit_results(&args.data, &results, out)
}

fn cmd_inspect(args: InspectArgs, out: &mut dyn Write) -> Result<i32> {
    let (model, vocab) = model_file::load(&args.model_file)?;
    let text = match args.action {
        InspectAction::Pair { a, b, dist } => {
            model.slot_for(dist)?;
            inspect::pair_score(&model, &vocab, &a, &b, dist)?.tsv_row() + "\n"
        }
        InspectAction::Top {
            word,
            n,
            direction,
            dist,
        } => {
            model.slot_for(dist)?;
            inspect::to_tsv(&inspect::top_interactions(
                &model, &vocab, &word, n, direction, dist,
            )?)
        }
        InspectAction::Explain { text } => {
            let tokens = vocab.encode(&corpus::tokenize(&text));
            let explanation = inspect::explain(&model, &tokens)?;
            let mut s = format!("# logit={} bias={}\n", explanation.logit, explanation.bias);
            for (word, value) in &explanation.linear {
                s.push_str(&format!(
                    "# linear\t{}\t{}\n",
                    vocab.word(*word).unwrap_or("?"),
                    value
                ));
            }
            s + &explanation.to_tsv(&vocab, &tokens)
        }
    };
    out.write_all(text.as_bytes()).map_err(io_out)?;
    Ok(EXIT_OK)
}

pub fn gradcheck_exit_code(report: &GradcheckReport) -> i32 {
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_DATA
    }
}

fn cmd_gradcheck(args: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    if args.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let report = trainer::gradcheck(args.model, args.trials, args.seed)?;
    writeln!(
        out,
        "model={} trials={} max_rel_error={:.3e} worst_trial={} tolerance={:.0e} {}",
        report.kind.name(),
        report.trials,
        report.max_error,
        report.worst_trial,
        trainer::GRADCHECK_TOLERANCE,
        if report.passed() { "PASS" } else { "FAIL" }
    )
    .map_err(io_out)?;
    Ok(gradcheck_exit_code(&report))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Protocol(a) => cmd_protocol(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Inspect(a) => cmd_inspect(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
