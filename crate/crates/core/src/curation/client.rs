use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

/// Anything that turns a single user prompt into a completion.
pub trait Completer: Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Environment variable holding a bearer token, if the service needs one.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

fn default_temperature() -> f64 {
    0.7
}
fn default_timeout_secs() -> f64 {
    60.0
}
fn default_max_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    500
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ClientConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: default_temperature(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
            api_key_env: None,
        }
    }
}

pub struct CompletionClient {
    cfg: ClientConfig,
    token: Option<String>,
    http: reqwest::blocking::Client,
}

impl std::fmt::Debug for CompletionClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompletionClient").field("cfg", &self.cfg).finish()
    }
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl CompletionClient {
    pub fn new(cfg: ClientConfig) -> Result<Self> {
        if !(cfg.timeout_secs > 0.0 && cfg.timeout_secs.is_finite()) {
            return Err(Error::config("timeout_secs must be positive"));
        }
        let token = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Completion(format!("building http client: {e}")))?;
        Ok(CompletionClient { cfg, token, http })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.cfg
    }

    fn attempt(&self, prompt: &str) -> std::result::Result<String, Failure> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        });
        let mut req = self.http.post(&self.cfg.endpoint).json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retryable(format!("http {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(format!("http {status}")));
        }
        let v: serde_json::Value = resp
            .json()
            .map_err(|e| Failure::Retryable(format!("bad response body: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| Failure::Retryable("response has no choices[0].message.content".into()))
    }
}

impl Completer for CompletionClient {
    fn name(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(msg)) => {
                    return Err(Error::Completion(format!("{}: {msg}", self.cfg.endpoint)))
                }
                Err(Failure::Retryable(msg)) if attempt >= self.cfg.max_retries => {
                    return Err(Error::Completion(format!(
                        "{}: {msg} (after {} attempts)",
                        self.cfg.endpoint,
                        attempt + 1
                    )))
                }
                Err(Failure::Retryable(_)) => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }
}
