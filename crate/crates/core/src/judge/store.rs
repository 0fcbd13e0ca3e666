//! Append-only verdict archives.
//!
//! Each run directory holds one JSONL file per `(model_label, dim_id)` pair,
//! named `<model_label>__<dim_id>.jsonl`. Files are never rewritten: a
//! re-score of the same cell appends a new record, and the latest record for
//! a `(sample_id, dim_id, model_label)` key wins when the store is loaded.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::JudgeVerdict;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("verdict store I/O on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed verdict record: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: record for model \"{found}\" in archive of model \"{expected}\"")]
    MisfiledRecord {
        path: String,
        line: usize,
        expected: String,
        found: String,
    },
    #[error("model label \"{0}\" is not usable in archive file names")]
    BadLabel(String),
}

/// Identity of one scoring cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub sample_id: String,
    pub dim_id: String,
    pub model_label: String,
}

/// Labels become file-name components, so they are restricted to a charset
/// that cannot collide with the `__` separator or escape the directory.
pub fn check_label(label: &str) -> Result<(), StoreError> {
    let ok = !label.is_empty()
        && !label.contains("__")
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.');
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadLabel(label.to_string()))
    }
}

#[derive(Debug)]
pub struct VerdictStore {
    verdicts_dir: PathBuf,
    index: BTreeMap<CellKey, JudgeVerdict>,
    count: usize,
}

impl VerdictStore {
    /// Opens (creating if needed) the `verdicts/` directory under `run_dir`
    /// and indexes every existing record.
    pub fn open(run_dir: &Path) -> Result<Self, StoreError> {
        let verdicts_dir = run_dir.join("verdicts");
        fs::create_dir_all(&verdicts_dir).map_err(|e| StoreError::Io {
            path: verdicts_dir.display().to_string(),
            source: e,
        })?;
        let mut store = Self {
            verdicts_dir,
            index: BTreeMap::new(),
            count: 0,
        };
        store.load_existing()?;
        Ok(store)
    }

    fn load_existing(&mut self) -> Result<(), StoreError> {
        let mut paths: Vec<PathBuf> = Vec::new();
        let entries = fs::read_dir(&self.verdicts_dir).map_err(|e| StoreError::Io {
            path: self.verdicts_dir.display().to_string(),
            source: e,
        })?;
        for entry in entries {
            let entry = entry.map_err(|e| StoreError::Io {
                path: self.verdicts_dir.display().to_string(),
                source: e,
            })?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
                paths.push(path);
            }
        }
        paths.sort();
        for path in paths {
            self.load_archive(&path)?;
        }
        Ok(())
    }

    fn load_archive(&mut self, path: &Path) -> Result<(), StoreError> {
        let display = path.display().to_string();
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let expected_model = stem.split("__").next().unwrap_or_default().to_string();
        let file = File::open(path).map_err(|e| StoreError::Io {
            path: display.clone(),
            source: e,
        })?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| StoreError::Io {
                path: display.clone(),
                source: e,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let verdict: JudgeVerdict =
                serde_json::from_str(&line).map_err(|e| StoreError::MalformedRecord {
                    path: display.clone(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if verdict.model_label != expected_model {
                return Err(StoreError::MisfiledRecord {
                    path: display.clone(),
                    line: i + 1,
                    expected: expected_model,
                    found: verdict.model_label,
                });
            }
            self.insert(verdict);
        }
        Ok(())
    }

    fn insert(&mut self, verdict: JudgeVerdict) {
        let key = CellKey {
            sample_id: verdict.sample_id.clone(),
            dim_id: verdict.dim_id.clone(),
            model_label: verdict.model_label.clone(),
        };
        self.count += 1;
        self.index.insert(key, verdict);
    }

    pub fn archive_path(&self, model_label: &str, dim_id: &str) -> PathBuf {
        self.verdicts_dir
            .join(format!("{model_label}__{dim_id}.jsonl"))
    }

    pub fn verdicts_dir(&self) -> &Path {
        &self.verdicts_dir
    }

    /// Appends one record to its archive and updates the in-memory index.
    pub fn append(&mut self, verdict: &JudgeVerdict) -> Result<(), StoreError> {
        check_label(&verdict.model_label)?;
        check_label(&verdict.dim_id)?;
        let path = self.archive_path(&verdict.model_label, &verdict.dim_id);
        let display = path.display().to_string();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StoreError::Io {
                path: display.clone(),
                source: e,
            })?;
        let mut line = serde_json::to_string(verdict).expect("verdict serializes");
        line.push('\n');
        file.write_all(line.as_bytes())
            .map_err(|e| StoreError::Io {
                path: display,
                source: e,
            })?;
        self.insert(verdict.clone());
        Ok(())
    }

    /// Latest verdict for a cell, if any.
    pub fn get(&self, sample_id: &str, dim_id: &str, model_label: &str) -> Option<&JudgeVerdict> {
        self.index.get(&CellKey {
            sample_id: sample_id.to_string(),
            dim_id: dim_id.to_string(),
            model_label: model_label.to_string(),
        })
    }

    /// True when the cell already has a verdict produced from exactly this
    /// prompt. A changed hash means the old record is stale and the cell
    /// must be re-scored.
    pub fn has_current(
        &self,
        sample_id: &str,
        dim_id: &str,
        model_label: &str,
        prompt_hash: &str,
    ) -> bool {
        self.get(sample_id, dim_id, model_label)
            .map(|v| v.prompt_hash == prompt_hash)
            .unwrap_or(false)
    }

    /// Number of distinct cells with a current record.
    pub fn cell_count(&self) -> usize {
        self.index.len()
    }

    /// Total records ever appended/loaded, including superseded ones.
    pub fn record_count(&self) -> usize {
        self.count
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &JudgeVerdict)> {
        self.index.iter()
    }
}
