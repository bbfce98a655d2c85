//! Artifact persistence and the CLI error type.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sea_core::policy::ParamVector;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Parse { .. } => 1,
            CliError::Io { .. } => 2,
        }
    }

    pub fn invalid(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

/// One JSON value per line, `\n`-terminated.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("artifact types serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    write_bytes(path, to_jsonl(items).as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    parse_jsonl(&read_text(path)?).map_err(|(line, message)| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

pub fn write_checkpoint(path: &Path, params: &ParamVector) -> Result<(), CliError> {
    write_bytes(path, &params.to_bytes())
}

pub fn read_checkpoint(path: &Path) -> Result<ParamVector, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    ParamVector::from_bytes(&bytes).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })
}
