use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::transport::{agent, env_var, post_json, BackendError};

pub const CLEANER_API_URL: &str = "CLEANER_API_URL";
pub const CLEANER_API_KEY: &str = "CLEANER_API_KEY";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

/// A text-in, text-out chat model.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
}

/// OpenAI-style chat-completions endpoint. The prompt is sent as a single
/// user message; the reply is the first choice's message content.
pub struct HttpChatBackend {
    url: String,
    api_key: Option<String>,
    model: String,
    agent: ureq::Agent,
}

impl HttpChatBackend {
    pub fn new(url: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key,
            model: model.into(),
            agent: agent(Duration::from_secs(120)),
        }
    }

    /// Reads the endpoint from `CLEANER_API_URL` and the optional bearer
    /// token from `CLEANER_API_KEY`.
    pub fn from_env(model: impl Into<String>) -> Result<Self, BackendError> {
        let url = env_var(CLEANER_API_URL)?;
        Ok(Self::new(url, std::env::var(CLEANER_API_KEY).ok(), model))
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp = post_json(&self.agent, &self.url, self.api_key.as_deref(), &body)?;
        resp.pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol("response has no choices[0].message.content".to_string()))
    }
}

#[derive(Deserialize)]
struct ReplayRecord {
    #[serde(default)]
    prompt: Option<String>,
    #[serde(default)]
    prompt_sha256: Option<String>,
    response: String,
}

/// Serves recorded responses keyed by the SHA-256 of the prompt. Records
/// are JSONL `{"prompt": ..., "response": ...}` or
/// `{"prompt_sha256": ..., "response": ...}`.
#[derive(Clone, Debug, Default)]
pub struct ReplayChatBackend {
    responses: HashMap<String, String>,
}

pub fn prompt_digest(prompt: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

impl ReplayChatBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.responses.insert(prompt_digest(prompt), response.into());
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file = File::open(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let mut out = Self::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BackendError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(&line)
                .map_err(|e| BackendError::Config(format!("{}:{}: {e}", path.display(), idx + 1)))?;
            let key = match (rec.prompt, rec.prompt_sha256) {
                (Some(p), _) => prompt_digest(&p),
                (None, Some(h)) => h.to_ascii_lowercase(),
                (None, None) => {
                    return Err(BackendError::Config(format!(
                        "{}:{}: record needs prompt or prompt_sha256",
                        path.display(),
                        idx + 1
                    )))
                }
            };
            out.responses.insert(key, rec.response);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for ReplayChatBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let key = prompt_digest(prompt);
        self.responses
            .get(&key)
            .cloned()
            .ok_or(BackendError::Missing(format!("prompt sha256 {key}")))
    }
}
