//! Line-delimited JSON files with an explicit schema version on every line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl DataError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Wraps a record body with its schema version. The version is always the
/// first field on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Versioned {
            schema_version: SCHEMA_VERSION,
            body,
        }
    }
}

/// Parses one line into a body, checking the schema version.
pub fn parse_line<T: DeserializeOwned>(line: &str) -> Result<T, String> {
    let v: Versioned<T> = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            v.schema_version
        ));
    }
    Ok(v.body)
}

pub fn to_line<T: Serialize>(body: &T) -> String {
    serde_json::to_string(&Versioned::new(body)).expect("record serialization is infallible")
}

pub fn to_string<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&to_line(item));
        out.push('\n');
    }
    out
}

/// Iterates `(1-based line number, raw line)` over non-blank lines.
pub fn raw_lines(path: &Path) -> Result<Vec<(usize, String)>, DataError> {
    let f = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    raw_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            parse_line(&line).map_err(|message| DataError::Parse {
                path: path.to_path_buf(),
                line: n,
                message,
            })
        })
        .collect()
}

pub fn write<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<(), DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(f);
    for item in items {
        writeln!(w, "{}", to_line(item)).map_err(|e| DataError::io(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}
