//! Request bodies and reply extraction for each provider wire format.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{json, Value};

use crate::frames::EncodedImage;

use super::{ModelEndpoint, ProviderKind};

/// A turn in the conversation sent to a provider.
#[derive(Debug, Clone)]
pub enum Turn<'a> {
    User { text: String, images: Vec<&'a EncodedImage> },
    Assistant(String),
}

fn data_url(image: &EncodedImage) -> String {
    format!("data:{};base64,{}", image.mime, STANDARD.encode(&image.bytes))
}

fn openai_body(endpoint: &ModelEndpoint, system: &str, turns: &[Turn<'_>]) -> Value {
    let mut messages = vec![json!({"role": "system", "content": system})];
    for turn in turns {
        messages.push(match turn {
            Turn::User { text, images } => {
                let mut parts = vec![json!({"type": "text", "text": text})];
                parts.extend(images.iter().map(|img| {
                    json!({"type": "image_url", "image_url": {"url": data_url(img)}})
                }));
                json!({"role": "user", "content": parts})
            }
            Turn::Assistant(text) => json!({"role": "assistant", "content": text}),
        });
    }
    json!({
        "model": endpoint.provider_model(),
        "messages": messages,
        "max_tokens": endpoint.max_tokens,
        "temperature": endpoint.temperature,
    })
}

fn anthropic_body(endpoint: &ModelEndpoint, system: &str, turns: &[Turn<'_>]) -> Value {
    let messages: Vec<Value> = turns
        .iter()
        .map(|turn| match turn {
            Turn::User { text, images } => {
                let mut parts: Vec<Value> = images
                    .iter()
                    .map(|img| {
                        json!({
                            "type": "image",
                            "source": {
                                "type": "base64",
                                "media_type": img.mime,
                                "data": STANDARD.encode(&img.bytes),
                            }
                        })
                    })
                    .collect();
                parts.push(json!({"type": "text", "text": text}));
                json!({"role": "user", "content": parts})
            }
            Turn::Assistant(text) => json!({"role": "assistant", "content": text}),
        })
        .collect();
    json!({
        "model": endpoint.provider_model(),
        "system": system,
        "messages": messages,
        "max_tokens": endpoint.max_tokens,
        "temperature": endpoint.temperature,
    })
}

pub(crate) fn request_url(endpoint: &ModelEndpoint) -> String {
    let base = endpoint.base_url.trim_end_matches('/');
    match endpoint.provider {
        ProviderKind::OpenaiCompatible => format!("{base}/chat/completions"),
        ProviderKind::Anthropic => format!("{base}/v1/messages"),
        ProviderKind::Mock => String::new(),
    }
}

pub(crate) fn auth_headers(endpoint: &ModelEndpoint, credential: Option<&str>) -> Vec<(String, String)> {
    match (endpoint.provider, credential) {
        (ProviderKind::OpenaiCompatible, Some(key)) => {
            vec![("authorization".into(), format!("Bearer {key}"))]
        }
        (ProviderKind::Anthropic, key) => {
            let mut h = vec![("anthropic-version".into(), "2023-06-01".into())];
            if let Some(key) = key {
                h.push(("x-api-key".into(), key.to_string()));
            }
            h
        }
        _ => Vec::new(),
    }
}

pub fn request_body(endpoint: &ModelEndpoint, system: &str, turns: &[Turn<'_>]) -> Value {
    match endpoint.provider {
        ProviderKind::Anthropic => anthropic_body(endpoint, system, turns),
        _ => openai_body(endpoint, system, turns),
    }
}

fn text_parts(content: &Value) -> Option<String> {
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        Value::Null => Some(String::new()),
        _ => None,
    }
}

/// The reply text from a successful response body.
pub fn reply_text(provider: ProviderKind, body: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("reply is not JSON: {e}"))?;
    let content = match provider {
        ProviderKind::Anthropic => v.get("content"),
        _ => v.pointer("/choices/0/message/content"),
    };
    content
        .and_then(text_parts)
        .ok_or_else(|| "reply has no message content".to_string())
}

/// Number of image parts across all user turns of a request body.
pub fn count_image_parts(body: &Value) -> usize {
    body["messages"]
        .as_array()
        .map(|msgs| {
            msgs.iter()
                .filter_map(|m| m["content"].as_array())
                .flatten()
                .filter(|p| matches!(p["type"].as_str(), Some("image_url" | "image")))
                .count()
        })
        .unwrap_or(0)
}

/// Number of user turns in a request body.
pub fn count_user_turns(body: &Value) -> usize {
    body["messages"]
        .as_array()
        .map(|msgs| msgs.iter().filter(|m| m["role"] == "user").count())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn openai_reply_string_and_parts() {
        let a = r#"{"choices":[{"message":{"role":"assistant","content":"1) A"}}]}"#;
        assert_eq!(reply_text(ProviderKind::OpenaiCompatible, a).unwrap(), "1) A");
        let b = r#"{"choices":[{"message":{"content":[{"type":"text","text":"x"},{"type":"text","text":"y"}]}}]}"#;
        assert_eq!(reply_text(ProviderKind::OpenaiCompatible, b).unwrap(), "xy");
        assert!(reply_text(ProviderKind::OpenaiCompatible, "{}").is_err());
    }

    #[test]
    fn anthropic_reply() {
        let a = r#"{"content":[{"type":"text","text":"1) B"}],"stop_reason":"end_turn"}"#;
        assert_eq!(reply_text(ProviderKind::Anthropic, a).unwrap(), "1) B");
    }
}
