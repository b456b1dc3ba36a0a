//! Text ingestion: tokenization, vocabularies, document encoding and
//! deterministic stratified splits.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Binary sentiment label. `Negative` is encoded as 0 and `Positive` as 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_digit(s: &str) -> Option<Label> {
        match s {
            "0" => Some(Label::Negative),
            "1" => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn from_bool(positive: bool) -> Label {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }

    pub fn digit(self) -> char {
        match self {
            Label::Negative => '0',
            Label::Positive => '1',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDoc {
    pub tokens: Vec<u32>,
    pub label: Label,
}

impl LabeledDoc {
    pub fn new(tokens: Vec<u32>, label: Label) -> Self {
        LabeledDoc { tokens, label }
    }
}

/// Lowercases `text` and splits it on every maximal run of non-alphanumeric
/// characters. Empty pieces are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Bidirectional word/id map. Ids are dense, assigned by descending training
/// frequency with ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    id_to_word: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(docs: &[Vec<S>], min_count: u64) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::InvalidArgument(
                "min_count must be at least 1".into(),
            ));
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for doc in docs {
            for word in doc {
                *freq.entry(word.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> =
            freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_entries(
            kept.into_iter().map(|(w, c)| (w.to_owned(), c)).collect(),
        ))
    }

    fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let mut word_to_id = HashMap::with_capacity(entries.len());
        let mut id_to_word = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (id, (word, count)) in entries.into_iter().enumerate() {
            word_to_id.insert(word.clone(), id as u32);
            id_to_word.push(word);
            counts.push(count);
        }
        Vocabulary {
            word_to_id,
            id_to_word,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.id_to_word.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.counts.get(id as usize).copied()
    }

    /// Like [`Vocabulary::id`] but reports the missing word as an error.
    pub fn require(&self, word: &str) -> Result<u32> {
        self.id(word)
            .ok_or_else(|| Error::UnknownWord(word.to_owned()))
    }

    /// Maps tokens to ids, silently dropping out-of-vocabulary words.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter().filter_map(|&id| self.word(id)).collect()
    }

    /// Serializes as `<word>\t<id>\t<count>` lines in ascending id order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, (word, count)) in self.id_to_word.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{word}\t{id}\t{count}");
        }
        out
    }

    pub fn from_tsv(text: &str, origin: &Path) -> Result<Self> {
        let malformed = |line: usize, reason: String| Error::Malformed {
            path: origin.to_owned(),
            line,
            reason,
        };
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            if raw.is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 3 {
                return Err(malformed(
                    line_no,
                    "expected <word>\\t<id>\\t<count>".into(),
                ));
            }
            let id: usize = fields[1]
                .parse()
                .map_err(|_| malformed(line_no, format!("bad id {:?}", fields[1])))?;
            let count: u64 = fields[2]
                .parse()
                .map_err(|_| malformed(line_no, format!("bad count {:?}", fields[2])))?;
            if id != entries.len() {
                return Err(malformed(
                    line_no,
                    format!("ids must be dense and ascending, got {id}"),
                ));
            }
            entries.push((fields[0].to_owned(), count));
        }
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading vocabulary {}", path.display()), e))?;
        Self::from_tsv(&text, path)
    }
}

/// Parses `<text>\t<0|1>` records. Blank lines are skipped; CRLF is accepted.
pub fn parse_tsv(text: &str, origin: &Path) -> Result<Vec<(String, Label)>> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let (body, label) = line.rsplit_once('\t').ok_or_else(|| Error::Malformed {
            path: origin.to_owned(),
            line: line_no,
            reason: "missing tab before label".into(),
        })?;
        let label = Label::from_digit(label.trim()).ok_or_else(|| Error::Malformed {
            path: origin.to_owned(),
            line: line_no,
            reason: format!("label must be 0 or 1, got {:?}", label),
        })?;
        records.push((body.to_owned(), label));
    }
    Ok(records)
}

pub fn load_tsv(path: &Path) -> Result<Vec<(String, Label)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_tsv(&text, path)
}

/// Tokenized records, ready for vocabulary building and encoding.
pub fn tokenize_records(records: &[(String, Label)]) -> Vec<(Vec<String>, Label)> {
    records
        .iter()
        .map(|(text, label)| (tokenize(text), *label))
        .collect()
}

pub fn encode_records(vocab: &Vocabulary, records: &[(Vec<String>, Label)]) -> Vec<LabeledDoc> {
    records
        .iter()
        .map(|(tokens, label)| LabeledDoc::new(vocab.encode(tokens), *label))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, valid_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_frac,
            valid_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 70/10/20 train/valid/test proportions.
    pub fn standard(seed: u64) -> Self {
        SplitSpec {
            train_frac: 0.7,
            valid_frac: 0.1,
            test_frac: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.valid_frac, self.test_frac];
        if fracs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidArgument(
                "split fractions must be positive".into(),
            ));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "split fractions must sum to 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<LabeledDoc>,
    pub valid: Vec<LabeledDoc>,
    pub test: Vec<LabeledDoc>,
}

pub const MIN_SPLIT_DOCS: usize = 10;

/// Stratified, seeded three-way split. Each class is shuffled and cut
/// separately so every part keeps the overall class ratio (to within one
/// document); the parts are then shuffled again.
pub fn split(docs: &[LabeledDoc], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if docs.len() < MIN_SPLIT_DOCS {
        return Err(Error::InvalidArgument(format!(
            "split needs at least {MIN_SPLIT_DOCS} documents, got {}",
            docs.len()
        )));
    }
    let mut rng = rng::stream(spec.seed, "split");
    let mut out = Split {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    for label in [Label::Negative, Label::Positive] {
        let mut class: Vec<&LabeledDoc> = docs.iter().filter(|d| d.label == label).collect();
        class.shuffle(&mut rng);
        let n = class.len();
        let n_train = (((n as f64) * spec.train_frac).round() as usize).min(n);
        let n_valid = (((n as f64) * spec.valid_frac).round() as usize).min(n - n_train);
        out.train
            .extend(class[..n_train].iter().map(|d| (*d).clone()));
        out.valid.extend(
            class[n_train..n_train + n_valid]
                .iter()
                .map(|d| (*d).clone()),
        );
        out.test
            .extend(class[n_train + n_valid..].iter().map(|d| (*d).clone()));
    }
    out.train.shuffle(&mut rng);
    out.valid.shuffle(&mut rng);
    out.test.shuffle(&mut rng);
    Ok(out)
}
