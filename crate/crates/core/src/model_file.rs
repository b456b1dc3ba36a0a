//! On-disk model format.
//!
//! A single line of JSON metadata terminated by `\n`, followed by every
//! parameter as a 32-bit little-endian float in layout order: bias, linear
//! weights, factors (`[word][distance][dim]`), pair weights.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{parameter_count, Dims, ModelKind, SwiModel};

pub const FORMAT_NAME: &str = "swi-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub buckets: usize,
    /// Vocabulary file, relative to the model file's directory.
    pub vocab: String,
}

pub fn encode(model: &SwiModel, vocab_ref: &str) -> Vec<u8> {
    let dims = model.dims();
    let header = Header {
        format: FORMAT_NAME.to_owned(),
        version: FORMAT_VERSION,
        kind: model.kind(),
        n: dims.n,
        k: dims.k,
        t: dims.t,
        buckets: dims.buckets,
        vocab: vocab_ref.to_owned(),
    };
    let mut bytes = serde_json::to_vec(&header).expect("header serializes");
    bytes.push(b'\n');
    bytes.reserve(model.parameter_count() * 4);
    for &p in model.params() {
        bytes.extend_from_slice(&(p as f32).to_le_bytes());
    }
    bytes
}

pub fn decode(bytes: &[u8]) -> Result<(Header, SwiModel)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.format != FORMAT_NAME {
        return Err(Error::Format(format!(
            "not a model file (format {:?})",
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {}",
            header.version
        )));
    }
    let dims = Dims::for_kind(header.kind, header.n, header.k, header.t, header.buckets)
        .map_err(|e| Error::Format(e.to_string()))?;
    if dims
        != (Dims {
            n: header.n,
            k: header.k,
            t: header.t,
            buckets: header.buckets,
        })
    {
        return Err(Error::Format(
            "header carries fields unused by its kind".into(),
        ));
    }
    let payload = &bytes[newline + 1..];
    let expected = parameter_count(header.kind, &dims);
    if payload.len() != expected * 4 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            expected * 4,
            payload.len()
        )));
    }
    let params = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let model = SwiModel::from_params(header.kind, dims, params)?;
    Ok((header, model))
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let context = || format!("writing {}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(context(), e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(context(), e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(context(), e.error))?;
    Ok(())
}

/// Default vocabulary path for a model file: `<model>.vocab`.
pub fn vocab_path_for(model_path: &Path) -> PathBuf {
    let mut name = model_path.file_name().unwrap_or_default().to_os_string();
    name.push(".vocab");
    model_path.with_file_name(name)
}

/// Saves the model and its vocabulary side by side.
pub fn save(path: &Path, model: &SwiModel, vocab: &Vocabulary) -> Result<()> {
    if vocab.len() != model.vocab_size() {
        return Err(Error::Format(format!(
            "vocabulary has {} words but the model expects {}",
            vocab.len(),
            model.vocab_size()
        )));
    }
    let vocab_path = vocab_path_for(path);
    let vocab_ref = vocab_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Format("model path must have a UTF-8 file name".into()))?;
    write_atomic(&vocab_path, vocab.to_tsv().as_bytes())?;
    write_atomic(path, &encode(model, vocab_ref))
}

pub fn load(path: &Path) -> Result<(SwiModel, Vocabulary)> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let (header, model) = decode(&bytes)?;
    let vocab_path = path.with_file_name(&header.vocab);
    let vocab = Vocabulary::load(&vocab_path)?;
    if vocab.len() != model.vocab_size() {
        return Err(Error::Format(format!(
            "{} has {} words but the model expects {}",
            vocab_path.display(),
            vocab.len(),
            model.vocab_size()
        )));
    }
    Ok((model, vocab))
}
