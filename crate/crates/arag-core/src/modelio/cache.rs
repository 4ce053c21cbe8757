//! Append-only persistent response cache.
//!
//! One JSON object per line: `{"key", "model_id", "text", "score"?}`.
//! Writes are serialized through a file lock; reads go to an in-memory map.

use super::GenerationResponse;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cache line {line} in {path} is corrupt: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    model_id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Debug)]
pub struct ResponseCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, GenerationResponse>>,
    writer: Mutex<File>,
}

impl ResponseCache {
    /// Open (or create) a cache file and load all existing entries.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| CacheError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&path)
            .map_err(io_err)?;

        let mut entries = HashMap::new();
        let reader = BufReader::new(File::open(&path).map_err(io_err)?);
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: CacheLine =
                serde_json::from_str(&line).map_err(|e| CacheError::Corrupt {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            entries.insert(
                parsed.key,
                GenerationResponse {
                    text: parsed.text,
                    retrieval_score: parsed.score,
                },
            );
        }

        Ok(Self {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(file),
        })
    }

    pub fn get(&self, key: &str) -> Option<GenerationResponse> {
        self.entries.read().unwrap().get(key).cloned()
    }

    /// Insert and append to the backing file.
    pub fn put(
        &self,
        key: &str,
        model_id: &str,
        response: &GenerationResponse,
    ) -> Result<(), CacheError> {
        let record = CacheLine {
            key: key.to_string(),
            model_id: model_id.to_string(),
            text: response.text.clone(),
            score: response.retrieval_score,
        };
        let line = serde_json::to_string(&record).expect("cache line serializes");
        {
            let mut writer = self.writer.lock().unwrap();
            writeln!(writer, "{line}").map_err(|source| CacheError::Io {
                path: self.path.display().to_string(),
                source,
            })?;
            writer.flush().map_err(|source| CacheError::Io {
                path: self.path.display().to_string(),
                source,
            })?;
        }
        self.entries
            .write()
            .unwrap()
            .insert(key.to_string(), response.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
