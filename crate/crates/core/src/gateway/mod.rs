//! Provider-agnostic access to chat-with-images models.
//!
//! A [`Gateway`] wraps one [`ModelEndpoint`] and realizes the presentation
//! modes on the wire:
//!
//! - collage: one user message with the composite image
//! - separate: one user message with every frame, oldest first
//! - batch: one user turn per frame in a single conversation; the questions
//!   arrive with the last frame and latency is summed over the turns
//!
//! Endpoints of kind `mock` answer offline from a [`MockProfile`].

mod mock;
mod transport;
pub mod wire;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{Mutex, Semaphore};

use crate::frames::EncodedImage;
use crate::prompt::PromptBundle;
use crate::scene::{AnnotationSchema, AnswerKey, PresentationMode, SamplingConfig};

pub use mock::{MockProfile, MockReply};
pub use transport::{
    CaptureTransport, CapturedRequest, HttpRequest, HttpResponse, ReqwestTransport, StallTransport,
    Transport, TransportError,
};
use wire::Turn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// `POST {base_url}/chat/completions` with `image_url` parts.
    OpenaiCompatible,
    /// `POST {base_url}/v1/messages` with base64 `image` blocks.
    Anthropic,
    Mock,
}

fn default_timeout_s() -> f64 {
    60.0
}
fn default_max_retries() -> u32 {
    2
}
fn default_parallelism() -> usize {
    4
}
fn default_max_tokens() -> u32 {
    512
}
fn default_backoff_ms() -> u64 {
    500
}

/// One model behind one provider. `credential_env` names the environment
/// variable holding the API key; the key itself never appears in this
/// struct, in logs or in result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub model_id: String,
    pub provider: ProviderKind,
    #[serde(default)]
    pub base_url: String,
    /// Model name sent to the provider when it differs from `model_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_env: Option<String>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub min_spacing_ms: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockProfile>,
}

impl ModelEndpoint {
    pub fn new(model_id: impl Into<String>, provider: ProviderKind, base_url: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            provider,
            base_url: base_url.into(),
            api_model: None,
            credential_env: None,
            timeout_s: default_timeout_s(),
            max_retries: default_max_retries(),
            min_spacing_ms: 0,
            parallelism: default_parallelism(),
            max_tokens: default_max_tokens(),
            temperature: 0.0,
            retry_backoff_ms: default_backoff_ms(),
            mock: None,
        }
    }

    pub fn mock_model(model_id: impl Into<String>, profile: MockProfile) -> Self {
        Self {
            mock: Some(profile),
            ..Self::new(model_id, ProviderKind::Mock, "")
        }
    }

    pub fn provider_model(&self) -> &str {
        self.api_model.as_deref().unwrap_or(&self.model_id)
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("endpoint registry {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed endpoint registry: {0}")]
    Json(String),
    #[error("endpoint {0}: {1}")]
    Invalid(String, &'static str),
    #[error("no endpoint named {0}")]
    Unknown(String),
}

/// The endpoint registry file: `{"endpoints": [ModelEndpoint, ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EndpointRegistry {
    pub endpoints: Vec<ModelEndpoint>,
}

impl EndpointRegistry {
    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let reg: Self = serde_json::from_str(text).map_err(|e| RegistryError::Json(e.to_string()))?;
        let mut seen = std::collections::HashSet::new();
        for e in &reg.endpoints {
            if !seen.insert(e.model_id.as_str()) {
                return Err(RegistryError::Invalid(e.model_id.clone(), "duplicate model_id"));
            }
            if e.provider == ProviderKind::Mock && e.mock.is_none() {
                return Err(RegistryError::Invalid(e.model_id.clone(), "mock endpoint needs a mock profile"));
            }
            if e.provider != ProviderKind::Mock && e.base_url.is_empty() {
                return Err(RegistryError::Invalid(e.model_id.clone(), "base_url is required"));
            }
            if e.parallelism == 0 || !(e.timeout_s > 0.0) {
                return Err(RegistryError::Invalid(e.model_id.clone(), "parallelism and timeout must be positive"));
            }
        }
        Ok(reg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RegistryError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn get(&self, model_id: &str) -> Result<&ModelEndpoint, RegistryError> {
        self.endpoints
            .iter()
            .find(|e| e.model_id == model_id)
            .ok_or_else(|| RegistryError::Unknown(model_id.to_string()))
    }
}

/// How the last request of a query ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransportStatus {
    Ok,
    Timeout,
    Network { message: String },
    Http { code: u16 },
    Auth { code: u16 },
    Malformed { message: String },
}

impl TransportStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, TransportStatus::Ok)
    }

    fn retryable(&self) -> bool {
        match self {
            TransportStatus::Timeout | TransportStatus::Network { .. } => true,
            TransportStatus::Http { code } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    /// Empty only when `status` is not `Ok`.
    pub raw_text: String,
    pub latency_s: f64,
    /// Requests sent, retries included, over all turns.
    pub attempts: u32,
    pub status: TransportStatus,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("{mode} mode with {frames} frames needs {expected} images, got {found}")]
    ModeContract {
        mode: &'static str,
        frames: u32,
        expected: usize,
        found: usize,
    },
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("the mock model needs the scenario's ground truth")]
    MissingTruth,
    #[error("mock endpoint has no profile")]
    MissingProfile,
}

/// Per-query facts the gateway needs besides the prompt. The ground truth
/// is only read by the mock model.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub scenario_id: &'a str,
    pub schema: &'a AnnotationSchema,
    pub truth: Option<&'a AnswerKey>,
}

/// Images a mode expects for a config.
pub fn expected_images(config: &SamplingConfig) -> usize {
    match config.mode {
        PresentationMode::Collage => 1,
        PresentationMode::Separate | PresentationMode::Batch => config.frame_count as usize,
    }
}

struct RateLimiter {
    spacing: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    async fn wait(&self) {
        let start = {
            let mut next = self.next.lock().await;
            let now = Instant::now();
            let start = next.map_or(now, |n| n.max(now));
            *next = Some(start + self.spacing);
            start
        };
        tokio::time::sleep_until(start.into()).await;
    }
}

/// A client for one endpoint. Cheap to share behind an `Arc`.
pub struct Gateway {
    endpoint: ModelEndpoint,
    transport: Arc<dyn Transport>,
    limiter: RateLimiter,
    permits: Semaphore,
}

struct Attempted {
    result: Result<String, TransportStatus>,
    attempts: u32,
    latency: Duration,
}

impl Gateway {
    pub fn new(endpoint: ModelEndpoint) -> Self {
        Self::with_transport(endpoint, Arc::new(ReqwestTransport::new()))
    }

    pub fn with_transport(endpoint: ModelEndpoint, transport: Arc<dyn Transport>) -> Self {
        Self {
            limiter: RateLimiter {
                spacing: Duration::from_millis(endpoint.min_spacing_ms),
                next: Mutex::new(None),
            },
            permits: Semaphore::new(endpoint.parallelism.max(1)),
            endpoint,
            transport,
        }
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn credential(&self) -> Result<Option<String>, GatewayError> {
        match (&self.endpoint.credential_env, self.endpoint.provider) {
            (_, ProviderKind::Mock) | (None, _) => Ok(None),
            (Some(var), _) => std::env::var(var)
                .map(Some)
                .map_err(|_| GatewayError::MissingCredential(var.clone())),
        }
    }

    /// Sends one prompt with its images and returns the model's reply.
    /// Transport and authentication failures come back as an outcome with a
    /// non-`Ok` status; only broken preconditions are errors.
    pub async fn send(
        &self,
        bundle: &PromptBundle,
        images: &[EncodedImage],
        config: &SamplingConfig,
        ctx: QueryContext<'_>,
    ) -> Result<QueryOutcome, GatewayError> {
        let expected = expected_images(config);
        if images.len() != expected || bundle.image_roles.len() != expected {
            return Err(GatewayError::ModeContract {
                mode: config.mode.as_str(),
                frames: config.frame_count,
                expected,
                found: if images.len() != expected {
                    images.len()
                } else {
                    bundle.image_roles.len()
                },
            });
        }
        let _permit = self.permits.acquire().await.expect("semaphore never closes");

        if self.endpoint.provider == ProviderKind::Mock {
            let profile = self.endpoint.mock.as_ref().ok_or(GatewayError::MissingProfile)?;
            let truth = ctx.truth.ok_or(GatewayError::MissingTruth)?;
            self.limiter.wait().await;
            let reply = profile.reply(ctx.schema, ctx.scenario_id, config, truth);
            return Ok(QueryOutcome {
                raw_text: reply.text,
                latency_s: reply.latency_s,
                attempts: 1,
                status: TransportStatus::Ok,
            });
        }

        let credential = self.credential()?;
        let headers = wire::auth_headers(&self.endpoint, credential.as_deref());

        let mut turns: Vec<Turn<'_>> = Vec::new();
        let mut attempts = 0;
        let mut latency = Duration::ZERO;
        let requests: Vec<(String, Vec<&EncodedImage>)> = match config.mode {
            PresentationMode::Collage | PresentationMode::Separate => {
                vec![(bundle.user_text.clone(), images.iter().collect())]
            }
            PresentationMode::Batch => bundle
                .image_roles
                .iter()
                .zip(images)
                .map(|(role, img)| {
                    (
                        role.turn_text.clone().unwrap_or_else(|| bundle.user_text.clone()),
                        vec![img],
                    )
                })
                .collect(),
        };
        let mut last = String::new();
        for (text, imgs) in requests {
            turns.push(Turn::User { text, images: imgs });
            let body = wire::request_body(&self.endpoint, &bundle.system_text, &turns);
            let request = HttpRequest {
                url: wire::request_url(&self.endpoint),
                headers: headers.clone(),
                body,
            };
            let done = self.request(request).await;
            attempts += done.attempts;
            latency += done.latency;
            match done.result {
                Ok(reply) => {
                    turns.push(Turn::Assistant(reply.clone()));
                    last = reply;
                }
                Err(status) => {
                    tracing::warn!(model = %self.endpoint.model_id, ?status, "query failed");
                    return Ok(QueryOutcome {
                        raw_text: String::new(),
                        latency_s: latency.as_secs_f64(),
                        attempts,
                        status,
                    });
                }
            }
        }
        Ok(QueryOutcome {
            raw_text: last,
            latency_s: latency.as_secs_f64(),
            attempts,
            status: TransportStatus::Ok,
        })
    }

    /// One request with retries. Latency counts only the final attempt.
    async fn request(&self, request: HttpRequest) -> Attempted {
        let limit = Duration::from_secs_f64(self.endpoint.timeout_s);
        let total = self.endpoint.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.limiter.wait().await;
            let started = Instant::now();
            let res = tokio::time::timeout(limit, self.transport.post(request.clone())).await;
            let latency = started.elapsed();
            let result = match res {
                Err(_) | Ok(Err(TransportError::Timeout)) => Err(TransportStatus::Timeout),
                Ok(Err(TransportError::Network(message))) => Err(TransportStatus::Network { message }),
                Ok(Ok(resp)) => match resp.status {
                    200..=299 => wire::reply_text(self.endpoint.provider, &resp.body)
                        .map_err(|message| TransportStatus::Malformed { message }),
                    401 | 403 => Err(TransportStatus::Auth { code: resp.status }),
                    code => Err(TransportStatus::Http { code }),
                },
            };
            match result {
                Err(status) if status.retryable() && attempt < total => {
                    tracing::debug!(model = %self.endpoint.model_id, attempt, ?status, "retrying");
                    let backoff = self.endpoint.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(6));
                    tokio::time::sleep(Duration::from_millis(backoff)).await;
                }
                result => {
                    return Attempted {
                        result,
                        attempts: attempt,
                        latency,
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_roundtrip_and_validation() {
        let text = r#"{"endpoints":[
            {"model_id":"qwen-vl-max","provider":"openai_compatible","base_url":"https://example.invalid/v1","credential_env":"QWEN_KEY"},
            {"model_id":"mock","provider":"mock","mock":{"seed":1,"default_accuracy":0.8}}
        ]}"#;
        let reg = EndpointRegistry::from_json(text).unwrap();
        assert_eq!(reg.get("qwen-vl-max").unwrap().max_retries, 2);
        assert_eq!(reg.get("mock").unwrap().mock.as_ref().unwrap().default_accuracy, 0.8);
        assert!(matches!(reg.get("nope"), Err(RegistryError::Unknown(_))));

        let dup = r#"{"endpoints":[{"model_id":"m","provider":"mock","mock":{}},{"model_id":"m","provider":"mock","mock":{}}]}"#;
        assert!(EndpointRegistry::from_json(dup).is_err());
        let no_url = r#"{"endpoints":[{"model_id":"m","provider":"anthropic"}]}"#;
        assert!(EndpointRegistry::from_json(no_url).is_err());
    }

    #[test]
    fn serialized_endpoint_carries_only_the_variable_name() {
        let mut e = ModelEndpoint::new("m", ProviderKind::OpenaiCompatible, "http://x");
        e.credential_env = Some("SEQSCENE_TEST_KEY".into());
        std::env::set_var("SEQSCENE_TEST_KEY", "sk-secret-value");
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("SEQSCENE_TEST_KEY"));
        assert!(!json.contains("sk-secret-value"));
        let req = HttpRequest {
            url: "http://x".into(),
            headers: wire::auth_headers(&e, Some("sk-secret-value")),
            body: serde_json::Value::Null,
        };
        assert!(!format!("{req:?}").contains("sk-secret-value"));
    }
}
