//! Chat-completion agent over HTTP.
//!
//! Sends `{model, messages, temperature, n}` as JSON and reads
//! `choices[].message.content`. A bearer token is taken from the environment
//! variable named in the config.

use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentError, ChatMessage, Query};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub name: String,
    pub base_url: String,
    pub path: String,
    pub model: String,
    pub temperature: f64,
    /// Completions per query; overridden per task by the harness.
    pub completions: usize,
    pub timeout_secs: u64,
    pub retries: u32,
    pub retry_backoff_ms: u64,
    /// Environment variable holding the bearer token; none sends no header.
    pub api_key_env: Option<String>,
    /// Upper bound on concurrent requests.
    pub max_in_flight: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            name: "chat".into(),
            base_url: "http://127.0.0.1:8000".into(),
            path: "/v1/chat/completions".into(),
            model: String::new(),
            temperature: 0.7,
            completions: 1,
            timeout_secs: 60,
            retries: 3,
            retry_backoff_ms: 500,
            api_key_env: Some("OPENAI_API_KEY".into()),
            max_in_flight: 4,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.completions == 0 {
            return Err("completions must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        format!(
            "{}/{}",
            self.base_url.trim_end_matches('/'),
            self.path.trim_start_matches('/')
        )
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    n: usize,
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

pub struct HttpAgent {
    cfg: AgentConfig,
    http: ureq::Agent,
}

impl HttpAgent {
    pub fn new(cfg: AgentConfig) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build();
        Self {
            cfg,
            http: ureq::Agent::new_with_config(config),
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    fn token(&self) -> Result<Option<String>, AgentError> {
        match &self.cfg.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| AgentError::MissingKey(var.clone())),
        }
    }

    fn once(&self, query: &Query, token: Option<&str>) -> Result<Vec<String>, AgentError> {
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: &query.messages,
            temperature: self.cfg.temperature,
            n: query.completions,
        };
        let mut req = self.http.post(self.cfg.url());
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send_json(&body).map_err(classify)?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(AgentError::Auth(status));
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(AgentError::Http {
                status,
                body: text.chars().take(200).collect(),
            });
        }
        let text = resp.body_mut().read_to_string().map_err(classify)?;
        let reply: ChatReply =
            serde_json::from_str(&text).map_err(|e| AgentError::Malformed(e.to_string()))?;
        let out: Vec<String> = reply
            .choices
            .into_iter()
            .map(|c| c.message.content.unwrap_or_default())
            .collect();
        if out.is_empty() {
            return Err(AgentError::Malformed("reply has no choices".into()));
        }
        Ok(out)
    }
}

fn classify(e: ureq::Error) -> AgentError {
    match e {
        ureq::Error::Timeout(_) => AgentError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => AgentError::Timeout,
        ureq::Error::Json(j) => AgentError::Malformed(j.to_string()),
        other => AgentError::Transport(other.to_string()),
    }
}

impl Agent for HttpAgent {
    fn name(&self) -> String {
        self.cfg.name.clone()
    }

    fn complete(&self, query: &Query) -> Result<Vec<String>, AgentError> {
        let token = self.token()?;
        let mut attempt = 0;
        loop {
            match self.once(query, token.as_deref()) {
                Ok(r) => return Ok(r),
                Err(e) if e.is_transient() && attempt < self.cfg.retries => {
                    attempt += 1;
                    warn!("{}: {e}; retry {attempt}/{}", self.cfg.name, self.cfg.retries);
                    let wait = self.cfg.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(6));
                    thread::sleep(Duration::from_millis(wait));
                }
                Err(e) => {
                    debug!("{}: giving up: {e}", self.cfg.name);
                    return Err(e);
                }
            }
        }
    }
}
