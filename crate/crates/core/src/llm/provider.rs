use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LlmError, LlmProviderConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// A chat-completion backend. Implementations must be usable from several
/// threads at once (one request per recording).
pub trait ChatProvider: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

/// OpenAI-style `POST {model, messages, temperature}` endpoint.
pub struct HttpChatProvider {
    cfg: LlmProviderConfig,
    agent: ureq::Agent,
}

impl HttpChatProvider {
    pub fn new(cfg: LlmProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { cfg, agent }
    }
}

fn map_transport(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::Timeout(_) => LlmError::ProviderTimeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => LlmError::ProviderTimeout,
        other => LlmError::Provider(other.to_string()),
    }
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let key = std::env::var(&self.cfg.api_key_env_var)
            .map_err(|_| LlmError::MissingApiKey(self.cfg.api_key_env_var.clone()))?;
        let body = json!({
            "model": self.cfg.model_name,
            "messages": messages,
            "temperature": 0,
        });
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint_url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(map_transport)?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(LlmError::Provider(format!(
                "HTTP {status}: {}",
                text.chars().take(500).collect::<String>()
            )));
        }
        let v: Value = resp.body_mut().read_json().map_err(map_transport)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::Provider("response has no choices[0].message.content".into()))
    }
}

/// Replays canned responses in order and records every request.
#[derive(Default)]
pub struct ScriptedProvider {
    responses: Mutex<VecDeque<Result<String, LlmError>>>,
    requests: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedProvider {
    pub fn new(responses: impl IntoIterator<Item = Result<String, LlmError>>) -> Self {
        Self {
            responses: Mutex::new(responses.into_iter().collect()),
            requests: Mutex::default(),
        }
    }

    pub fn replying(texts: &[&str]) -> Self {
        Self::new(texts.iter().map(|t| Ok(t.to_string())))
    }

    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.requests.lock().unwrap().clone()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.requests.lock().unwrap().push(messages.to_vec());
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(LlmError::Provider("scripted provider exhausted".into())))
    }
}

/// Append-only JSONL log of request/response pairs.
pub struct AuditLog {
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn record(&self, template: &str, messages: &[ChatMessage], outcome: &Result<String, LlmError>) {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let mut entry = json!({
            "timestamp": ts,
            "template": template,
            "request": messages,
        });
        match outcome {
            Ok(text) => entry["response"] = Value::String(text.clone()),
            Err(e) => entry["error"] = Value::String(e.to_string()),
        }
        let mut f = self.file.lock().unwrap();
        if let Err(e) = writeln!(f, "{entry}") {
            log::warn!("audit log write failed: {e}");
        }
    }
}

/// Calls the provider and logs the exchange when a log is attached.
pub(crate) fn call(
    provider: &dyn ChatProvider,
    audit: Option<&AuditLog>,
    template: &str,
    messages: &[ChatMessage],
) -> Result<String, LlmError> {
    let out = provider.complete(messages);
    if let Some(a) = audit {
        a.record(template, messages, &out);
    }
    out
}
