use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::ModelEndpoint;
use crate::prompt::{PromptBundle, PromptTemplate};
use crate::scene::AnnotationSchema;

use super::{EvaluationRecord, PhasePlan, RunOptions};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const RUN_FILE: &str = "run.json";
pub const PROMPTS_FILE: &str = "prompts.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path} line {line} is not a record: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> StoreError + '_ {
    move |e| StoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// How a record file ends.
enum Tail {
    /// Empty, or ends with a newline.
    Clean,
    /// Last line is a valid record but has no newline.
    Unterminated,
    /// Last line is a partial write; the file should end at this length.
    Torn(u64),
}

fn read_records(path: &Path) -> Result<(Vec<EvaluationRecord>, Tail), StoreError> {
    if !path.exists() {
        return Ok((Vec::new(), Tail::Clean));
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut lines: Vec<&str> = text.split('\n').collect();
    let last = lines.pop().unwrap_or("");
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    let tail = if last.trim().is_empty() {
        Tail::Clean
    } else {
        match serde_json::from_str(last) {
            Ok(r) => {
                out.push(r);
                Tail::Unterminated
            }
            Err(_) => {
                tracing::warn!(path = %path.display(), "ignoring torn final line");
                Tail::Torn((text.len() - last.len()) as u64)
            }
        }
    };
    Ok((out, tail))
}

/// Reads a JSONL record file. A final line without a newline that fails to
/// parse is an interrupted write and is ignored; any other bad line is
/// corruption.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<EvaluationRecord>, StoreError> {
    read_records(path.as_ref()).map(|(records, _)| records)
}

/// Append-only JSONL of evaluation records. Appends are serialized and each
/// record is flushed as one line.
#[derive(Debug)]
pub struct RecordStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl RecordStore {
    /// Opens (creating if needed) and returns the records already present.
    /// A partial final line left by an interrupted write is cut off so new
    /// records start on a fresh line; complete lines are never touched.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<EvaluationRecord>), StoreError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let (existing, tail) = read_records(&path)?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        match tail {
            Tail::Clean => {}
            Tail::Unterminated => file.write_all(b"\n").map_err(io_err(&path))?,
            Tail::Torn(keep) => file.set_len(keep).map_err(io_err(&path))?,
        }
        Ok((
            Self {
                path,
                file: Mutex::new(file),
            },
            existing,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &EvaluationRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        let mut f = self.file.lock().unwrap();
        f.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        f.flush().map_err(io_err(&self.path))
    }

    pub fn records(&self) -> Result<Vec<EvaluationRecord>, StoreError> {
        load_records(&self.path)
    }
}

/// Everything needed to resume a run, written once as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: String,
    pub code_version: String,
    pub endpoint: ModelEndpoint,
    pub plans: Vec<PhasePlan>,
    pub schema: AnnotationSchema,
    pub template: PromptTemplate,
    pub manifest_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truths_path: Option<String>,
    pub options: RunOptions,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), StoreError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(RUN_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(io_err(&path))
    }

    pub fn read(dir: &Path) -> Result<Self, StoreError> {
        let path = dir.join(RUN_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PromptLine {
    prompt_sha256: String,
    config_key: String,
    bundle: PromptBundle,
}

/// `prompts.jsonl`: each distinct prompt once, keyed by its hash.
#[derive(Debug)]
pub struct PromptLog {
    path: PathBuf,
    seen: Mutex<HashSet<String>>,
}

impl PromptLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut seen = HashSet::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            for line in text.lines() {
                if let Ok(p) = serde_json::from_str::<PromptLine>(line) {
                    seen.insert(p.prompt_sha256);
                }
            }
        }
        Ok(Self {
            path,
            seen: Mutex::new(seen),
        })
    }

    /// Logs `bundle` unless already present; returns its hash.
    pub fn log(&self, config_key: &str, bundle: &PromptBundle) -> Result<String, StoreError> {
        let hash = bundle.sha256();
        let mut seen = self.seen.lock().unwrap();
        if seen.insert(hash.clone()) {
            let mut line = serde_json::to_string(&PromptLine {
                prompt_sha256: hash.clone(),
                config_key: config_key.to_string(),
                bundle: bundle.clone(),
            })
            .expect("prompt serializes");
            line.push('\n');
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(io_err(&self.path))?;
            f.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        }
        Ok(hash)
    }
}
