//! Line-delimited JSON readers and writers for the on-disk formats:
//! scores, token-id sequences and the vocabulary descriptor list.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::score::Score;
use crate::tokenizer::{TokenSequence, Vocabulary};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid JSON")]
    Parse {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = File::open(path).map_err(|e| file_err(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| file_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|source| IoError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        items.push(item);
    }
    Ok(items)
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| file_err(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|source| IoError::Json {
            path: path.display().to_string(),
            source,
        })?;
        writeln!(out, "{line}").map_err(|e| file_err(path, e))?;
    }
    out.flush().map_err(|e| file_err(path, e))
}

pub fn read_scores(path: &Path) -> Result<Vec<Score>, IoError> {
    read_lines(path)
}

pub fn write_scores(path: &Path, scores: &[Score]) -> Result<(), IoError> {
    write_lines(path, scores)
}

pub fn read_sequences(path: &Path) -> Result<Vec<TokenSequence>, IoError> {
    read_lines(path)
}

pub fn write_sequences(path: &Path, sequences: &[TokenSequence]) -> Result<(), IoError> {
    write_lines(path, sequences)
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary, IoError> {
    let file = File::open(path).map_err(|e| file_err(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_vocabulary(path: &Path, vocab: &Vocabulary) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| file_err(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, vocab).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    writeln!(out).map_err(|e| file_err(path, e))?;
    out.flush().map_err(|e| file_err(path, e))
}
