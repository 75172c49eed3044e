use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use seqscene::frames::EncodedImage;
use seqscene::gateway::wire::{count_image_parts, count_user_turns};
use seqscene::gateway::{
    CaptureTransport, Gateway, GatewayError, HttpResponse, ModelEndpoint, ProviderKind, QueryContext,
    StallTransport, TransportError, TransportStatus,
};
use seqscene::prompt::build_prompt;
use seqscene::scene::{default_covla_schema, GridLayout, PresentationMode, Resolution, SamplingConfig};

const KEY_REPLY: &str = "Reasoning.\n1) A 2) A 3) B 4) A 5) C 6) B 7) B";

fn config(mode: PresentationMode) -> SamplingConfig {
    let grid = if mode == PresentationMode::Collage { GridLayout::new(2, 2).unwrap() } else { GridLayout::row(4).unwrap() };
    SamplingConfig::new(200, 4, Resolution::from_level(1).unwrap(), grid, mode).unwrap()
}

fn images(n: usize) -> Vec<EncodedImage> {
    (0..n).map(|i| EncodedImage::png(vec![0x89, b'P', b'N', b'G', i as u8])).collect()
}

fn openai_reply(text: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn endpoint(provider: ProviderKind, env: &str) -> ModelEndpoint {
    ModelEndpoint {
        credential_env: Some(env.into()),
        retry_backoff_ms: 1,
        ..ModelEndpoint::new("m", provider, "http://model.invalid/v1")
    }
}

async fn send(gateway: &Gateway, mode: PresentationMode) -> Result<seqscene::gateway::QueryOutcome, GatewayError> {
    let schema = default_covla_schema();
    let c = config(mode);
    let bundle = build_prompt(&c, &schema);
    let n = seqscene::gateway::expected_images(&c);
    gateway
        .send(&bundle, &images(n), &c, QueryContext { scenario_id: "s1", schema: &schema, truth: None })
        .await
}

#[tokio::test]
async fn separate_mode_sends_every_frame_in_one_request() {
    std::env::set_var("SEQSCENE_TEST_KEY_SEPARATE", "sk-test-separate");
    let capture = CaptureTransport::fixed(200, openai_reply(KEY_REPLY));
    let gateway = Gateway::with_transport(endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_SEPARATE"), capture.clone());
    let out = send(&gateway, PresentationMode::Separate).await.unwrap();
    assert_eq!(out.status, TransportStatus::Ok);
    assert_eq!(out.raw_text, KEY_REPLY);
    let reqs = capture.requests();
    assert_eq!(reqs.len(), 1);
    let body = &reqs[0].request.body;
    assert_eq!(count_image_parts(body), 4);
    assert_eq!(count_user_turns(body), 1);
    assert_eq!(reqs[0].request.url, "http://model.invalid/v1/chat/completions");
    assert_eq!(reqs[0].request.header("authorization"), Some("Bearer sk-test-separate"));
}

#[tokio::test]
async fn collage_mode_sends_one_image() {
    std::env::set_var("SEQSCENE_TEST_KEY_COLLAGE", "sk-test-collage");
    let reply = json!({"content": [{"type": "text", "text": KEY_REPLY}]}).to_string();
    let capture = CaptureTransport::fixed(200, reply);
    let mut ep = endpoint(ProviderKind::Anthropic, "SEQSCENE_TEST_KEY_COLLAGE");
    ep.base_url = "http://model.invalid".into();
    let gateway = Gateway::with_transport(ep, capture.clone());
    let out = send(&gateway, PresentationMode::Collage).await.unwrap();
    assert_eq!(out.raw_text, KEY_REPLY);
    let req = &capture.requests()[0].request;
    assert_eq!(req.url, "http://model.invalid/v1/messages");
    assert_eq!(req.header("x-api-key"), Some("sk-test-collage"));
    assert!(req.header("anthropic-version").is_some());
    assert_eq!(count_image_parts(&req.body), 1);
    assert!(req.body["system"].as_str().unwrap().contains("driving"));
}

#[tokio::test]
async fn batch_mode_is_one_turn_per_frame() {
    std::env::set_var("SEQSCENE_TEST_KEY_BATCH", "sk-test-batch");
    let capture = CaptureTransport::new(|_, i| {
        Ok(HttpResponse {
            status: 200,
            body: openai_reply(if i == 3 { KEY_REPLY } else { "Noted." }),
        })
    });
    let gateway = Gateway::with_transport(endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_BATCH"), capture.clone());
    let out = send(&gateway, PresentationMode::Batch).await.unwrap();
    assert_eq!(out.raw_text, KEY_REPLY);
    assert_eq!(out.attempts, 4);
    let reqs = capture.requests();
    assert_eq!(reqs.len(), 4);
    for (k, r) in reqs.iter().enumerate() {
        // the conversation grows by one user turn and one image per frame
        assert_eq!(count_user_turns(&r.request.body), k + 1);
        assert_eq!(count_image_parts(&r.request.body), k + 1);
    }
    let last = reqs[3].request.body["messages"].as_array().unwrap();
    assert_eq!(last.iter().filter(|m| m["role"] == "assistant").count(), 3);
}

#[tokio::test]
async fn timeouts_are_retried_then_reported() {
    std::env::set_var("SEQSCENE_TEST_KEY_STALL", "sk");
    let stall = StallTransport::new();
    let mut ep = endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_STALL");
    ep.timeout_s = 0.05;
    ep.max_retries = 2;
    let gateway = Gateway::with_transport(ep, stall.clone());
    let out = send(&gateway, PresentationMode::Collage).await.unwrap();
    assert_eq!(out.status, TransportStatus::Timeout);
    assert_eq!(out.attempts, 3);
    assert_eq!(stall.calls(), 3);
}

#[tokio::test]
async fn server_errors_retry_and_auth_errors_do_not() {
    std::env::set_var("SEQSCENE_TEST_KEY_RETRY", "sk");
    let flaky = CaptureTransport::new(|_, i| match i {
        0 => Ok(HttpResponse { status: 503, body: "busy".into() }),
        1 => Err(TransportError::Network("reset".into())),
        _ => Ok(HttpResponse { status: 200, body: openai_reply(KEY_REPLY) }),
    });
    let gateway = Gateway::with_transport(endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_RETRY"), flaky.clone());
    let out = send(&gateway, PresentationMode::Collage).await.unwrap();
    assert_eq!(out.status, TransportStatus::Ok);
    assert_eq!(out.attempts, 3);

    let denied = CaptureTransport::fixed(401, "{}");
    let gateway = Gateway::with_transport(endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_RETRY"), denied.clone());
    let out = send(&gateway, PresentationMode::Collage).await.unwrap();
    assert_eq!(out.status, TransportStatus::Auth { code: 401 });
    assert_eq!(out.attempts, 1);
    assert_eq!(denied.requests().len(), 1);
}

#[tokio::test]
async fn missing_credential_is_an_error() {
    let gateway = Gateway::with_transport(
        endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_NEVER_SET"),
        CaptureTransport::fixed(200, "{}"),
    );
    assert!(matches!(send(&gateway, PresentationMode::Collage).await, Err(GatewayError::MissingCredential(_))));
}

#[tokio::test]
async fn request_starts_respect_min_spacing() {
    std::env::set_var("SEQSCENE_TEST_KEY_SPACING", "sk");
    let capture = CaptureTransport::fixed(200, openai_reply(KEY_REPLY));
    let mut ep = endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_SPACING");
    ep.min_spacing_ms = 40;
    ep.parallelism = 4;
    let gateway = Gateway::with_transport(ep, capture.clone());
    let sends: Vec<_> = (0..5).map(|_| send(&gateway, PresentationMode::Collage)).collect();
    for r in futures::future::join_all(sends).await {
        assert_eq!(r.unwrap().status, TransportStatus::Ok);
    }
    let mut at: Vec<_> = capture.requests().iter().map(|r| r.at).collect();
    at.sort();
    for w in at.windows(2) {
        let gap = w[1] - w[0];
        assert!(gap >= Duration::from_millis(38), "gap {gap:?}");
    }
}

#[tokio::test]
async fn secrets_stay_out_of_outcomes_and_debug_output() {
    std::env::set_var("SEQSCENE_TEST_KEY_SECRET", "sk-very-secret-value");
    let capture = CaptureTransport::fixed(200, openai_reply(KEY_REPLY));
    let gateway = Gateway::with_transport(endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_SECRET"), capture.clone());
    let out = send(&gateway, PresentationMode::Collage).await.unwrap();
    let req = &capture.requests()[0].request;
    assert!(!format!("{req:?}").contains("sk-very-secret-value"));
    assert!(!format!("{out:?}").contains("sk-very-secret-value"));
    assert!(!serde_json::to_string(gateway.endpoint()).unwrap().contains("sk-very-secret-value"));
}

/// A local OpenAI-compatible server over real HTTP.
#[tokio::test]
async fn real_http_round_trip() {
    std::env::set_var("SEQSCENE_TEST_KEY_HTTP", "sk-http");
    let hits = Arc::new(AtomicUsize::new(0));
    let seen: Arc<Mutex<Vec<(Option<String>, usize)>>> = Arc::default();
    let app = {
        let hits = hits.clone();
        let seen = seen.clone();
        Router::new().route(
            "/v1/chat/completions",
            post(move |headers: HeaderMap, Json(body): Json<Value>| {
                let hits = hits.clone();
                let seen = seen.clone();
                async move {
                    let auth = headers.get("authorization").and_then(|v| v.to_str().ok()).map(String::from);
                    seen.lock().unwrap().push((auth, count_image_parts(&body)));
                    if hits.fetch_add(1, Ordering::SeqCst) == 0 {
                        return (StatusCode::TOO_MANY_REQUESTS, Json(json!({"error": "slow down"})));
                    }
                    (StatusCode::OK, Json(json!({"choices": [{"message": {"role": "assistant", "content": KEY_REPLY}}]})))
                }
            }),
        )
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let mut ep = endpoint(ProviderKind::OpenaiCompatible, "SEQSCENE_TEST_KEY_HTTP");
    ep.base_url = format!("http://{addr}/v1");
    let gateway = Gateway::new(ep);
    let out = send(&gateway, PresentationMode::Separate).await.unwrap();
    assert_eq!(out.status, TransportStatus::Ok);
    assert_eq!(out.attempts, 2);
    assert_eq!(out.raw_text, KEY_REPLY);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert!(seen.iter().all(|(auth, n)| auth.as_deref() == Some("Bearer sk-http") && *n == 4));
}
