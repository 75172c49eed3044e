use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use thiserror::Error;

/// One JSON POST to a provider.
#[derive(Clone)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: serde_json::Value,
}

// Header values can hold credentials, so they are never printed.
impl fmt::Debug for HttpRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.headers.iter().map(|(k, _)| k.as_str()).collect();
        f.debug_struct("HttpRequest")
            .field("url", &self.url)
            .field("headers", &names)
            .finish_non_exhaustive()
    }
}

impl HttpRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
}

#[async_trait]
pub trait Transport: Send + Sync {
    async fn post(&self, request: HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// HTTP transport backed by `reqwest`.
#[derive(Debug, Clone, Default)]
pub struct ReqwestTransport {
    client: reqwest::Client,
}

impl ReqwestTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

#[async_trait]
impl Transport for ReqwestTransport {
    async fn post(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = self
            .client
            .post(&request.url)
            .header("content-type", "application/json")
            .body(request.body.to_string());
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        let map = |e: reqwest::Error| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.without_url().to_string())
            }
        };
        let response = builder.send().await.map_err(map)?;
        let status = response.status().as_u16();
        let body = response.text().await.map_err(map)?;
        Ok(HttpResponse { status, body })
    }
}

/// A request seen by [`CaptureTransport`], with the time it arrived.
#[derive(Debug, Clone)]
pub struct CapturedRequest {
    pub request: HttpRequest,
    pub at: Instant,
}

/// Records every request and answers from a script. Used to inspect payloads
/// without a network.
pub struct CaptureTransport {
    captured: Mutex<Vec<CapturedRequest>>,
    respond: Box<dyn Fn(&HttpRequest, usize) -> Result<HttpResponse, TransportError> + Send + Sync>,
}

impl CaptureTransport {
    pub fn new(
        respond: impl Fn(&HttpRequest, usize) -> Result<HttpResponse, TransportError> + Send + Sync + 'static,
    ) -> Arc<Self> {
        Arc::new(Self {
            captured: Mutex::new(Vec::new()),
            respond: Box::new(respond),
        })
    }

    /// Answers every request with `status` and `body`.
    pub fn fixed(status: u16, body: impl Into<String>) -> Arc<Self> {
        let body = body.into();
        Self::new(move |_, _| {
            Ok(HttpResponse {
                status,
                body: body.clone(),
            })
        })
    }

    pub fn requests(&self) -> Vec<CapturedRequest> {
        self.captured.lock().unwrap().clone()
    }
}

#[async_trait]
impl Transport for CaptureTransport {
    async fn post(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let index = {
            let mut c = self.captured.lock().unwrap();
            c.push(CapturedRequest {
                request: request.clone(),
                at: Instant::now(),
            });
            c.len() - 1
        };
        (self.respond)(&request, index)
    }
}

/// Never answers; every request runs into the endpoint timeout.
#[derive(Debug, Default)]
pub struct StallTransport {
    calls: Mutex<usize>,
}

impl StallTransport {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().unwrap()
    }
}

#[async_trait]
impl Transport for StallTransport {
    async fn post(&self, _request: HttpRequest) -> Result<HttpResponse, TransportError> {
        *self.calls.lock().unwrap() += 1;
        tokio::time::sleep(Duration::from_secs(3600)).await;
        Err(TransportError::Timeout)
    }
}
