//! Transport-level chat-session client for an external vision-language
//! endpoint, plus an in-process scripted mock for tests.
//!
//! The wire schema is provider-agnostic: one JSON shape
//! `{model, messages: [{role, parts: [{type: "text"|"image", ...}]}]}`,
//! POSTed per turn with the full replayed history. Images travel as PNG
//! base64. A session is single-owner with one in-flight request at a time;
//! history is append-only and roles alternate user/model.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VlmError {
    #[error("bad session configuration: {0}")]
    BadConfig(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
}

/// One content part of a chat message.
#[derive(Clone, Debug, PartialEq)]
pub enum Part {
    Text(String),
    Image { media_type: String, data: Vec<u8> },
}

impl Part {
    pub fn text(t: impl Into<String>) -> Self {
        Part::Text(t.into())
    }

    pub fn image_png(data: Vec<u8>) -> Self {
        Part::Image {
            media_type: "image/png".into(),
            data,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Part::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_image(&self) -> bool {
        matches!(self, Part::Image { .. })
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Part::Text(t) => json!({"type": "text", "text": t}),
            Part::Image { media_type, data } => json!({
                "type": "image",
                "media_type": media_type,
                "data": base64::engine::general_purpose::STANDARD.encode(data),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    User,
    Model,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Model => "model",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Turn {
    pub role: Role,
    pub parts: Vec<Part>,
}

/// Session configuration. Comes from explicit values; the CLI fills it
/// from `VLM_ENDPOINT`, `VLM_MODEL`, `VLM_API_KEY` and `VLM_TIMEOUT_S`.
#[derive(Clone, Debug)]
pub struct SessionConfig {
    /// `mock:`, `mock:<script.jsonl>` or an http(s) URL.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Retries after the first attempt fails.
    pub max_retries: u32,
    /// First backoff delay; doubles per retry.
    pub retry_backoff: Duration,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            endpoint: "mock:".into(),
            model: "test-model".into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            max_retries: 2,
            retry_backoff: Duration::from_secs(1),
        }
    }
}

impl SessionConfig {
    /// Read the standard environment variables.
    pub fn from_env() -> Result<Self, VlmError> {
        let endpoint = std::env::var("VLM_ENDPOINT")
            .map_err(|_| VlmError::BadConfig("VLM_ENDPOINT is not set".into()))?;
        let model = std::env::var("VLM_MODEL").unwrap_or_else(|_| "default-model".into());
        let api_key = std::env::var("VLM_API_KEY").ok();
        let timeout = std::env::var("VLM_TIMEOUT_S")
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .map(Duration::from_secs_f64)
            .unwrap_or(Duration::from_secs(60));
        Ok(Self {
            endpoint,
            model,
            api_key,
            timeout,
            ..Self::default()
        })
    }
}

/// Reply of one successful exchange.
#[derive(Clone, Debug)]
pub struct ChatTurnReply {
    pub text: String,
    pub latency_s: f64,
}

/// Scripted behaviors for the mock endpoint, consumed in order. An
/// exhausted script answers with malformed text so the fallback path gets
/// exercised rather than wedging a run.
#[derive(Clone, Debug)]
pub enum MockBehavior {
    Reply(String),
    Timeout,
    Malformed,
}

#[derive(Debug, Default)]
struct MockState {
    script: VecDeque<MockBehavior>,
    /// Every received request: the new user parts plus the serialized body.
    requests: Vec<RecordedRequest>,
    exchanges: Vec<(String, String)>,
}

/// A request as the mock endpoint saw it.
#[derive(Clone, Debug)]
pub struct RecordedRequest {
    pub parts: Vec<Part>,
    pub body_json: String,
}

/// Handle to an in-process scripted endpoint. Cloning shares the state so
/// tests can inspect what the session sent.
#[derive(Clone, Debug, Default)]
pub struct MockServer {
    state: Arc<Mutex<MockState>>,
}

impl MockServer {
    pub fn new(script: Vec<MockBehavior>) -> Self {
        Self {
            state: Arc::new(Mutex::new(MockState {
                script: script.into(),
                requests: Vec::new(),
                exchanges: Vec::new(),
            })),
        }
    }

    /// Load behaviors from a JSONL script: one object per line, either
    /// `{"reply": "..."}`, `{"timeout": true}` or `{"malformed": true}`.
    pub fn from_script_file(path: &std::path::Path) -> Result<Self, VlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VlmError::BadConfig(format!("cannot read mock script: {e}")))?;
        let mut script = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(line).map_err(|e| {
                VlmError::BadConfig(format!("mock script line {}: {e}", i + 1))
            })?;
            if let Some(reply) = v.get("reply").and_then(|r| r.as_str()) {
                script.push(MockBehavior::Reply(reply.to_string()));
            } else if v.get("timeout").and_then(|t| t.as_bool()) == Some(true) {
                script.push(MockBehavior::Timeout);
            } else if v.get("malformed").and_then(|t| t.as_bool()) == Some(true) {
                script.push(MockBehavior::Malformed);
            } else {
                return Err(VlmError::BadConfig(format!(
                    "mock script line {}: unknown behavior",
                    i + 1
                )));
            }
        }
        Ok(Self::new(script))
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.lock().unwrap().requests.clone()
    }

    /// JSON-lines transcript: one request/reply pair per line.
    pub fn transcript(&self) -> String {
        let state = self.state.lock().unwrap();
        let mut out = String::new();
        for (req, reply) in &state.exchanges {
            out.push_str(
                &json!({"request": req, "reply": reply}).to_string(),
            );
            out.push('\n');
        }
        out
    }

    fn exchange(&self, parts: &[Part], body: &str) -> Result<String, VlmError> {
        let mut state = self.state.lock().unwrap();
        state.requests.push(RecordedRequest {
            parts: parts.to_vec(),
            body_json: body.to_string(),
        });
        let behavior = state.script.pop_front().unwrap_or(MockBehavior::Malformed);
        let result = match behavior {
            MockBehavior::Reply(text) => Ok(text),
            MockBehavior::Malformed => Ok("this reply deliberately violates the format".to_string()),
            MockBehavior::Timeout => Err(VlmError::Timeout),
        };
        if let Ok(text) = &result {
            let body = body.to_string();
            state.exchanges.push((body, text.clone()));
        }
        result
    }
}

enum Transport {
    Mock(MockServer),
    Http(HttpTransport),
}

struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    fn exchange(&self, body: &str) -> Result<String, VlmError> {
        let mut req = self
            .client
            .post(&self.url)
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(key) = &self.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                VlmError::Timeout
            } else {
                VlmError::Transport(e.to_string())
            }
        })?;
        if !resp.status().is_success() {
            return Err(VlmError::Transport(format!("http {}", resp.status())));
        }
        let v: serde_json::Value = resp
            .json()
            .map_err(|e| VlmError::Transport(format!("bad reply body: {e}")))?;
        v.get("text")
            .and_then(|t| t.as_str())
            .map(str::to_string)
            .ok_or_else(|| VlmError::Transport("reply missing `text` field".into()))
    }
}

/// A persistent chat session for the duration of one exploration run.
pub struct ChatSession {
    config: SessionConfig,
    transport: Transport,
    history: Vec<Turn>,
}

impl std::fmt::Debug for ChatSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatSession")
            .field("endpoint", &self.config.endpoint)
            .field("history_len", &self.history.len())
            .finish()
    }
}

/// Open a session against the configured endpoint. `mock:` binds to a
/// fresh in-process mock (optionally scripted from a file); http(s)
/// endpoints require a credential.
pub fn open_session(config: SessionConfig) -> Result<ChatSession, VlmError> {
    let transport = if let Some(rest) = config.endpoint.strip_prefix("mock:") {
        let mock = if rest.is_empty() {
            MockServer::default()
        } else {
            MockServer::from_script_file(std::path::Path::new(rest))?
        };
        Transport::Mock(mock)
    } else if config.endpoint.starts_with("http://") || config.endpoint.starts_with("https://") {
        if config.api_key.as_deref().unwrap_or("").is_empty() {
            return Err(VlmError::BadConfig(
                "endpoint requires VLM_API_KEY".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| VlmError::BadConfig(e.to_string()))?;
        Transport::Http(HttpTransport {
            client,
            url: config.endpoint.clone(),
            api_key: config.api_key.clone(),
        })
    } else {
        return Err(VlmError::BadConfig(format!(
            "unsupported endpoint scheme: {}",
            config.endpoint
        )));
    };
    Ok(ChatSession {
        config,
        transport,
        history: Vec::new(),
    })
}

/// Open a session bound to a caller-owned mock, for tests that need to
/// inspect the traffic.
pub fn open_session_with_mock(config: SessionConfig, mock: MockServer) -> ChatSession {
    ChatSession {
        config,
        transport: Transport::Mock(mock),
        history: Vec::new(),
    }
}

impl ChatSession {
    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Serialize the full conversation (history plus one new user message)
    /// into the wire body.
    fn request_body(&self, new_parts: &[Part]) -> String {
        let mut messages: Vec<serde_json::Value> = self
            .history
            .iter()
            .map(|turn| {
                json!({
                    "role": turn.role.as_str(),
                    "parts": turn.parts.iter().map(Part::to_json).collect::<Vec<_>>(),
                })
            })
            .collect();
        messages.push(json!({
            "role": Role::User.as_str(),
            "parts": new_parts.iter().map(Part::to_json).collect::<Vec<_>>(),
        }));
        json!({"model": self.config.model, "messages": messages}).to_string()
    }

    /// Send one turn, retrying per the session policy. On success the
    /// request and reply are appended to the history; after exhausted
    /// retries the error surfaces and the history is unchanged.
    pub fn send_turn(&mut self, parts: Vec<Part>) -> Result<ChatTurnReply, VlmError> {
        assert!(!parts.is_empty(), "request parts must be non-empty");
        let body = self.request_body(&parts);
        let started = Instant::now();
        let mut attempt = 0u32;
        let text = loop {
            let result = match &self.transport {
                Transport::Mock(mock) => mock.exchange(&parts, &body),
                Transport::Http(http) => http.exchange(&body),
            };
            match result {
                Ok(text) => break text,
                Err(e) => {
                    if attempt >= self.config.max_retries {
                        return Err(e);
                    }
                    let backoff = self.config.retry_backoff * 2u32.pow(attempt);
                    if !backoff.is_zero() {
                        std::thread::sleep(backoff);
                    }
                    attempt += 1;
                }
            }
        };
        self.history.push(Turn {
            role: Role::User,
            parts,
        });
        self.history.push(Turn {
            role: Role::Model,
            parts: vec![Part::Text(text.clone())],
        });
        Ok(ChatTurnReply {
            text,
            latency_s: started.elapsed().as_secs_f64(),
        })
    }
}
