use serde::{Deserialize, Serialize};

use crate::annotate::GroundTruth;
use crate::gateway::TransportStatus;
use crate::prompt::ParsedResponse;
use crate::scene::SamplingConfig;

fn ok_status() -> TransportStatus {
    TransportStatus::Ok
}

/// One answer to one scenario under one config, from a model or a person.
/// Exactly one of `model_id` and `evaluator_id` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub record_id: String,
    pub scenario_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluator_id: Option<String>,
    /// What the subject saw: `collage`, `separate`, `batch`, `gif` or `video`.
    pub presentation: String,
    pub config: SamplingConfig,
    pub predicted: ParsedResponse,
    pub truth: GroundTruth,
    pub latency_s: f64,
    /// RFC 3339, UTC.
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u8>,
    #[serde(default)]
    pub draw_index: u32,
    #[serde(default = "ok_status")]
    pub transport: TransportStatus,
    #[serde(default)]
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
}

impl EvaluationRecord {
    /// The model id or evaluator id.
    pub fn subject(&self) -> &str {
        self.model_id
            .as_deref()
            .or(self.evaluator_id.as_deref())
            .unwrap_or("")
    }

    pub fn is_human(&self) -> bool {
        self.evaluator_id.is_some()
    }

    /// Whether the query reached the subject and came back. Records that
    /// failed in transport are kept for auditing but left out of metrics.
    pub fn completed(&self) -> bool {
        self.transport.is_ok()
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// `p{phase}/{model}/{config}/d{draw}`; unique within a run.
pub fn model_record_id(phase: u8, model_id: &str, config: &SamplingConfig, draw_index: u32) -> String {
    format!("p{phase}/{model_id}/{}/d{draw_index}", config.key())
}
