//! On-disk formats. Every writer is deterministic: equal values give
//! byte-identical files.

pub mod cohort;
pub mod metrics;
pub mod ontology;
pub mod transcript;
pub mod weights;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Appends one JSON document and a newline.
pub(crate) fn push_json_line<T: serde::Serialize>(out: &mut String, value: &T) {
    out.push_str(&serde_json::to_string(value).expect("in-memory values always serialize"));
    out.push('\n');
}
