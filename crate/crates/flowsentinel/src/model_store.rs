//! Single-file model container.
//!
//! ```text
//! offset  size  content
//! 0       8     magic "FLOWSNT1"
//! 8       4     header length H, u32 little-endian
//! 12      H     UTF-8 JSON header
//! 12+H    ...   parameter tensors, f64 little-endian, in header order
//! ```
//!
//! The header lists every tensor with its shape, byte offset (relative to
//! the start of the payload) and byte length. Loading rebuilds and revalidates
//! everything; nothing in the file is ever executed.

use std::io::Write;
use std::path::Path;

use flowsentinel_core::model::{ArchitectureConfig, ModelParams, PARAM_NAMES};
use flowsentinel_core::pipeline::Standardizer;
use flowsentinel_core::{PreprocState, Task, Taxonomy, Tensor, TrainConfig, TrainHistory};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FLOWSNT1";
pub const FORMAT_VERSION: u32 = 1;
pub const MAX_HEADER_LEN: usize = 16 * 1024 * 1024;
const PREFIX_LEN: usize = 12;

/// How a model was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub config: TrainConfig,
    pub label_column: String,
    pub data_source: String,
    pub limit_per_class: Option<usize>,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: ModelParams,
    pub preproc: PreprocState,
    pub taxonomy: Taxonomy,
    pub feature_names: Vec<String>,
    pub metadata: TrainingMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format_version: u32,
    pub task: Task,
    pub architecture: ArchitectureConfig,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub taxonomy: Taxonomy,
    pub metadata: TrainingMetadata,
    pub tensors: Vec<TensorEntry>,
}

pub fn to_bytes(m: &SavedModel) -> Result<Vec<u8>> {
    let mut tensors = Vec::with_capacity(PARAM_NAMES.len());
    let mut offset = 0u64;
    for (name, t) in PARAM_NAMES.iter().zip(m.model.params()) {
        let bytes = (t.len() * 8) as u64;
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset,
            bytes,
        });
        offset += bytes;
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        task: m.preproc.task,
        architecture: m.model.arch,
        class_names: m.preproc.label_map.clone(),
        feature_names: m.feature_names.clone(),
        standardizer: m.preproc.standardizer.clone(),
        taxonomy: m.taxonomy.clone(),
        metadata: m.metadata.clone(),
        tensors,
    };
    let json =
        serde_json::to_vec_pretty(&header).map_err(|e| Error::format("<memory>", e.to_string()))?;
    if json.len() > MAX_HEADER_LEN {
        return Err(Error::format(
            "<memory>",
            format!("header is {} bytes, limit is {MAX_HEADER_LEN}", json.len()),
        ));
    }
    let mut out = Vec::with_capacity(PREFIX_LEN + json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in m.model.params() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses and validates a container. `path` is only used in messages.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<SavedModel> {
    let fmt = |msg: String| Error::format(path, msg);
    if bytes.len() < PREFIX_LEN {
        return Err(fmt(format!(
            "file is {} bytes, too short for the {PREFIX_LEN}-byte prefix",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(fmt(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..8]),
            std::str::from_utf8(MAGIC).unwrap_or_default()
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4-byte slice")) as usize;
    if header_len > MAX_HEADER_LEN {
        return Err(fmt(format!(
            "header length {header_len} exceeds the {MAX_HEADER_LEN}-byte limit"
        )));
    }
    let header_end = PREFIX_LEN + header_len;
    if bytes.len() < header_end {
        return Err(fmt(format!(
            "truncated header: expected {header_len} bytes, found {}",
            bytes.len() - PREFIX_LEN
        )));
    }

    let value: serde_json::Value = serde_json::from_slice(&bytes[PREFIX_LEN..header_end])
        .map_err(|e| fmt(format!("header is not valid JSON: {e}")))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(fmt(format!(
                "unsupported format version {v}, this build reads version {FORMAT_VERSION}"
            )))
        }
        None => return Err(fmt("header has no format_version".into())),
    }
    let header: Header =
        serde_json::from_value(value).map_err(|e| fmt(format!("invalid header: {e}")))?;

    let arch = header.architecture;
    arch.validate()?;
    let shapes = arch.param_shapes();
    if header.tensors.len() != PARAM_NAMES.len() {
        return Err(fmt(format!(
            "header lists {} tensors, expected {}",
            header.tensors.len(),
            PARAM_NAMES.len()
        )));
    }
    let mut expected_offset = 0u64;
    for ((entry, name), shape) in header.tensors.iter().zip(PARAM_NAMES).zip(&shapes) {
        if entry.name != name || &entry.shape != shape {
            return Err(fmt(format!(
                "tensor `{}` {:?} does not match the architecture, expected `{name}` {shape:?}",
                entry.name, entry.shape
            )));
        }
        let bytes_needed = shape.iter().product::<usize>() as u64 * 8;
        if entry.offset != expected_offset || entry.bytes != bytes_needed {
            return Err(fmt(format!(
                "tensor `{name}` declares offset {} and {} bytes, expected offset {expected_offset} and {bytes_needed} bytes",
                entry.offset, entry.bytes
            )));
        }
        expected_offset += bytes_needed;
    }

    let payload = &bytes[header_end..];
    let expected = expected_offset as usize;
    if payload.len() < expected {
        return Err(fmt(format!(
            "truncated payload: expected {expected} bytes, found {} ({} missing)",
            payload.len(),
            expected - payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(fmt(format!(
            "payload has {} trailing bytes after the expected {expected}",
            payload.len() - expected
        )));
    }

    let mut tensors = Vec::with_capacity(PARAM_NAMES.len());
    for (entry, shape) in header.tensors.iter().zip(shapes) {
        let start = entry.offset as usize;
        let data: Vec<f64> = payload[start..start + entry.bytes as usize]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let t = Tensor::new(shape, data)?;
        if !t.is_finite() {
            return Err(fmt(format!(
                "tensor `{}` contains non-finite values",
                entry.name
            )));
        }
        tensors.push(t);
    }
    let model = ModelParams::from_tensors(arch, tensors)?;

    let preproc = PreprocState::new(header.standardizer, header.class_names, header.task)?;
    if preproc.feature_count() != arch.feature_count || preproc.class_count() != arch.class_count {
        return Err(fmt(format!(
            "standardizer and class map ({} features, {} classes) disagree with the architecture ({} features, {} classes)",
            preproc.feature_count(),
            preproc.class_count(),
            arch.feature_count,
            arch.class_count
        )));
    }
    if header.feature_names.len() != arch.feature_count {
        return Err(fmt(format!(
            "{} feature names for {} features",
            header.feature_names.len(),
            arch.feature_count
        )));
    }
    header.metadata.config.validate()?;

    Ok(SavedModel {
        model,
        preproc,
        taxonomy: header.taxonomy,
        feature_names: header.feature_names,
        metadata: header.metadata,
    })
}

/// Reads only the header, for inspection tools.
pub fn read_header(bytes: &[u8], path: &Path) -> Result<Header> {
    from_bytes(bytes, path)?;
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4-byte slice")) as usize;
    serde_json::from_slice(&bytes[PREFIX_LEN..PREFIX_LEN + header_len])
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Writes to a temporary file in the target directory, then renames it into
/// place.
pub fn save_model(path: impl AsRef<Path>, m: &SavedModel) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(m)?;
    if path.is_dir() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::IsADirectory, "is a directory"),
        ));
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
