//! Output artifacts: every file the CLI writes embeds the tool version, the
//! fully resolved configuration, the seed, and a hash of the input data, so
//! any result can be reproduced from the artifact alone. Files are written
//! atomically (temp file in the same directory, then rename) so concurrent
//! invocations never interleave partial writes.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::io;
use std::path::Path;

#[derive(Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: Value,
    pub input_sha256: Option<String>,
}

impl Metadata {
    pub fn new<C: Serialize>(
        command: &'static str,
        seed: u64,
        config: &C,
        input_sha256: Option<String>,
    ) -> Self {
        Self {
            tool: "clriboss",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            input_sha256,
        }
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Serialize `payload` with a `metadata` field prepended.
pub fn with_metadata<P: Serialize>(metadata: &Metadata, payload: &P) -> io::Result<Value> {
    let meta = serde_json::to_value(metadata).map_err(io::Error::other)?;
    let body = serde_json::to_value(payload).map_err(io::Error::other)?;
    let mut object = Map::new();
    object.insert("metadata".to_string(), meta);
    match body {
        Value::Object(fields) => {
            for (key, value) in fields {
                object.insert(key, value);
            }
        }
        other => {
            object.insert("result".to_string(), other);
        }
    }
    Ok(Value::Object(object))
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let stem = path
        .file_name()
        .ok_or_else(|| io::Error::other("output path has no file name"))?;
    let tmp_name = format!(".{}.tmp.{}", stem.to_string_lossy(), std::process::id());
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => std::path::PathBuf::from(&tmp_name),
    };
    std::fs::write(&tmp, contents)?;
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn write_json(path: &Path, value: &Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
