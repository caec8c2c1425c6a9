//! Shared plumbing for the HTTP JSON backends.

use std::time::Duration;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no recorded response: {0}")]
    Missing(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::AgentBuilder::new().timeout(timeout).build()
}

pub(crate) fn post_json(
    agent: &ureq::Agent,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
) -> Result<Value, BackendError> {
    let mut req = agent.post(url).set("Content-Type", "application/json");
    if let Some(key) = api_key {
        req = req.set("Authorization", &format!("Bearer {key}"));
    }
    match req.send_json(body) {
        Ok(resp) => resp
            .into_json::<Value>()
            .map_err(|e| BackendError::Protocol(format!("invalid JSON response: {e}"))),
        Err(ureq::Error::Status(code, resp)) => Err(BackendError::Status {
            code,
            body: resp.into_string().unwrap_or_default(),
        }),
        Err(e) => Err(BackendError::Transport(e.to_string())),
    }
}

pub(crate) fn env_var(name: &str) -> Result<String, BackendError> {
    std::env::var(name).map_err(|_| BackendError::Config(format!("{name} is not set")))
}
