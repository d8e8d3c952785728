//! Line-delimited text formats and the run configuration.
//!
//! Every format starts with one `#` header line of `key=value` tokens and
//! then holds one comma-separated record per line. Floats are written with
//! 17 significant digits so parsing and re-writing reproduces the file.
//! Quaternions are scalar-first. Blank lines and further `#` lines are skipped.

mod config;
mod episode;
mod metrics;
mod samples;
mod scores;
mod trajectory;

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};

pub use config::{EditSection, RunConfig};
pub use episode::{parse_episode_log, write_episode_log, EVENTS_SUFFIX};
pub use metrics::{parse_metrics, write_metrics};
pub use samples::{parse_samples, write_samples, SAMPLE_FIELDS};
pub use scores::{parse_scores, write_scores};
pub use trajectory::{parse_trajectory, read_trajectory, save_trajectory, write_trajectory, NORM_REJECT, NORM_WARN, POSE_FIELDS, WRENCH_FIELDS};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, field `{field}`: {message}")]
pub struct FormatError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl FormatError {
    pub fn new(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Something accepted but adjusted while parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn join_f64(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

/// Header tokens of the first line; `kind` is the leading bare word.
pub(crate) struct Header {
    pub kind: String,
    pub values: BTreeMap<String, String>,
}

impl Header {
    pub fn get(&self, key: &str) -> std::result::Result<&str, FormatError> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| FormatError::new(1, key, "missing from header"))
    }

    pub fn get_f64(&self, key: &str) -> std::result::Result<f64, FormatError> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| FormatError::new(1, key, format!("'{v}' is not a number")))
    }
}

/// Data lines with their 1-based line numbers.
pub(crate) type Lines<'a> = Vec<(usize, &'a str)>;

/// Splits text into its header and numbered data lines.
pub(crate) fn split_lines(text: &str) -> std::result::Result<(Header, Lines<'_>), FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let first = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| FormatError::new(1, "header", "empty file"))?;
    let body = first
        .1
        .strip_prefix('#')
        .ok_or_else(|| FormatError::new(first.0, "header", "first line must start with '#'"))?;
    let mut kind = String::new();
    let mut values = BTreeMap::new();
    for token in body.split_whitespace() {
        match token.split_once('=') {
            Some((k, v)) => {
                values.insert(k.to_string(), v.to_string());
            }
            None if kind.is_empty() => kind = token.to_string(),
            None => return Err(FormatError::new(first.0, token, "header tokens must be key=value")),
        }
    }
    let data = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('#')).collect();
    Ok((Header { kind, values }, data))
}

pub(crate) fn parse_field(line: usize, field: &str, raw: &str) -> std::result::Result<f64, FormatError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| FormatError::new(line, field, format!("'{}' is not a number", raw.trim())))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FormatError::new(line, field, "value is not finite"))
    }
}

/// Splits a record and checks its field count.
pub(crate) fn record<'a>(line: usize, text: &'a str, names: &[&str]) -> std::result::Result<Vec<&'a str>, FormatError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != names.len() {
        let field = names.get(parts.len().min(names.len().saturating_sub(1))).copied().unwrap_or("record");
        return Err(FormatError::new(
            line,
            field,
            format!("expected {} fields, found {}", names.len(), parts.len()),
        ));
    }
    Ok(parts)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
