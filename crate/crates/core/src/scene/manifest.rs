use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A captioned clip from some driving dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSource {
    pub scenario_id: String,
    /// Path (relative paths resolve against the manifest's directory) or URI.
    pub video_ref: String,
    pub caption: String,
    #[serde(default)]
    pub start_offset_ms: u64,
    #[serde(default)]
    pub dataset_tag: String,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Parsed manifest plus the lines that failed to parse.
#[derive(Debug, Default)]
pub struct Manifest {
    pub scenarios: Vec<ScenarioSource>,
    pub errors: Vec<ManifestError>,
    /// Directory relative `video_ref`s resolve against.
    pub base_dir: Option<std::path::PathBuf>,
}

impl Manifest {
    /// Parses JSONL. Bad lines (malformed JSON, empty caption, duplicate id)
    /// are collected in `errors` and parsing continues.
    pub fn parse(text: &str) -> Self {
        let mut seen = HashSet::new();
        let mut out = Manifest::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ScenarioSource>(line) {
                Ok(s) if s.caption.trim().is_empty() => out.errors.push(ManifestError::Line {
                    line: line_no,
                    message: format!("scenario {:?} has an empty caption", s.scenario_id),
                }),
                Ok(s) if !seen.insert(s.scenario_id.clone()) => {
                    out.errors.push(ManifestError::Line {
                        line: line_no,
                        message: format!("duplicate scenario id {:?}", s.scenario_id),
                    })
                }
                Ok(s) => out.scenarios.push(s),
                Err(e) => out.errors.push(ManifestError::Line {
                    line: line_no,
                    message: e.to_string(),
                }),
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut m = Self::parse(&text);
        m.base_dir = path.parent().map(Path::to_path_buf);
        Ok(m)
    }

    pub fn from_scenarios(scenarios: Vec<ScenarioSource>) -> Self {
        Self {
            scenarios,
            ..Self::default()
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.scenarios {
            out.push_str(&serde_json::to_string(s).expect("scenario serializes"));
            out.push('\n');
        }
        out
    }

    pub fn get(&self, scenario_id: &str) -> Option<&ScenarioSource> {
        self.scenarios.iter().find(|s| s.scenario_id == scenario_id)
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    /// Resolves a scenario's `video_ref` against the manifest directory.
    pub fn resolve_video(&self, source: &ScenarioSource) -> std::path::PathBuf {
        let p = Path::new(&source.video_ref);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }
}
