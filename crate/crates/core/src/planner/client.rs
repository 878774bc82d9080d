//! Blocking chat-completion client.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::thread;
use std::time::Duration;

pub const ENV_ENDPOINT: &str = "PLANNER_ENDPOINT";
pub const ENV_MODEL: &str = "PLANNER_MODEL";
pub const ENV_API_KEY: &str = "PLANNER_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage { role: role.to_string(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_consecutive_errors: usize,
    pub timeout: Duration,
    pub temperature: f64,
    /// Extra attempts after the first on transient failures.
    pub max_retries: u32,
    pub backoff: Duration,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key: None,
            max_consecutive_errors: 5,
            timeout: Duration::from_secs(120),
            temperature: 0.0,
            max_retries: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

impl PlannerConfig {
    /// Defaults overridden by the planner environment variables.
    pub fn from_env() -> Self {
        let mut c = PlannerConfig::default();
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            c.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            c.model = v;
        }
        c.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_consecutive_errors == 0 {
            return Err(Error::arg("max_consecutive_errors must be at least 1"));
        }
        if self.endpoint.is_empty() {
            return Err(Error::arg("planner endpoint is empty"));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

enum Attempt {
    Done(String),
    Retry(Error),
    Fatal(Error),
}

/// Chat-completion client with bounded exponential-backoff retries.
pub struct HttpPlanner {
    config: PlannerConfig,
    client: reqwest::blocking::Client,
}

impl HttpPlanner {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::PlannerUnavailable(e.to_string()))?;
        Ok(HttpPlanner { config, client })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    fn attempt(&self, messages: &[ChatMessage]) -> Attempt {
        let body = ChatRequest { model: &self.config.model, messages, temperature: self.config.temperature };
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(Error::PlannerUnavailable(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(Error::PlannerUnavailable(e.to_string())),
        };
        if !(200..300).contains(&status) {
            let err = Error::Http { status, body: text };
            return if status == 429 || status >= 500 { Attempt::Retry(err) } else { Attempt::Fatal(err) };
        }
        match serde_json::from_str::<ChatResponse>(&text) {
            Ok(r) => match r.choices.into_iter().next() {
                Some(c) => Attempt::Done(c.message.content),
                None => Attempt::Fatal(Error::Protocol("chat response has no choices".into())),
            },
            Err(e) => Attempt::Fatal(Error::Protocol(format!("malformed chat response: {e}"))),
        }
    }

    /// Sends `messages` and returns the assistant reply.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(messages) {
                Attempt::Done(s) => return Ok(s),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.config.max_retries => return Err(e),
                Attempt::Retry(_) => {
                    attempt += 1;
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
        }
    }
}
