//! Completion backends: HTTP, a directory of canned answers keyed by
//! prompt hash, and an in-memory script.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::PromptBundle;
use crate::represent::estimate_tokens;

pub const ENV_BACKEND_URL: &str = "TSAD_BACKEND_URL";
pub const ENV_API_KEY: &str = "TSAD_API_KEY";
pub const ENV_MODEL: &str = "TSAD_MODEL";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);
/// Fallback answer file of [`MockBackend`].
pub const MOCK_DEFAULT_FILE: &str = "default.txt";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("completion backend unavailable: {0}")]
    Unavailable(String),
    #[error("completion backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &PromptBundle) -> Result<Completion, BackendError>;
}

fn estimated(prompt: &PromptBundle, text: String) -> Completion {
    Completion {
        prompt_tokens: prompt.estimated_tokens,
        completion_tokens: estimate_tokens(&text),
        text,
    }
}

/// Counting semaphore capping concurrent requests.
#[derive(Debug)]
pub struct InFlightLimit {
    max: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

pub struct InFlightGuard<'a>(&'a InFlightLimit);

impl InFlightLimit {
    pub fn new(max: usize) -> Self {
        InFlightLimit {
            max: max.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.used.lock().expect("limit lock");
        while *used >= self.max {
            used = self.freed.wait(used).expect("limit lock");
        }
        *used += 1;
        InFlightGuard(self)
    }
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().expect("limit lock") -= 1;
        self.0.freed.notify_one();
    }
}

/// Provider-neutral JSON over HTTP: posts
/// `{model, messages, temperature: 0, images}` and accepts a `text` field,
/// `choices[0].message.content` or `content[0].text` in the answer.
pub struct HttpBackend {
    url: String,
    api_key: Option<String>,
    model: String,
    client: reqwest::blocking::Client,
    limit: InFlightLimit,
}

impl HttpBackend {
    /// Endpoint, key and model come from the environment only.
    pub fn from_env(max_in_flight: usize) -> Result<Self, BackendError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let url = var(ENV_BACKEND_URL).ok_or_else(|| BackendError::Config(format!("{ENV_BACKEND_URL} is not set")))?;
        let model = var(ENV_MODEL).ok_or_else(|| BackendError::Config(format!("{ENV_MODEL} is not set")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend {
            url,
            api_key: var(ENV_API_KEY),
            model,
            client,
            limit: InFlightLimit::new(max_in_flight),
        })
    }

    pub fn request_body(&self, prompt: &PromptBundle) -> Value {
        let b64 = base64::engine::general_purpose::STANDARD;
        json!({
            "model": self.model,
            "temperature": 0.0,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "images": prompt.images.iter().map(|p| b64.encode(p)).collect::<Vec<_>>(),
        })
    }
}

/// Answer text and token usage from a response body.
pub fn parse_http_answer(body: &Value) -> Option<(String, Option<usize>, Option<usize>)> {
    let text = body
        .get("text")
        .and_then(Value::as_str)
        .or_else(|| body.pointer("/choices/0/message/content").and_then(Value::as_str))
        .or_else(|| body.pointer("/content/0/text").and_then(Value::as_str))?;
    let usage = |keys: [&str; 2]| {
        keys.iter()
            .find_map(|k| body.pointer(&format!("/usage/{k}")).and_then(Value::as_u64))
            .map(|v| v as usize)
    };
    Some((
        text.to_string(),
        usage(["prompt_tokens", "input_tokens"]),
        usage(["completion_tokens", "output_tokens"]),
    ))
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &PromptBundle) -> Result<Completion, BackendError> {
        let _slot = self.limit.acquire();
        let mut req = self.client.post(&self.url).json(&self.request_body(prompt));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!("HTTP {status}")));
        }
        let body: Value = resp.json().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let (text, p, c) = parse_http_answer(&body).ok_or_else(|| BackendError::Unavailable("response carries no answer text".into()))?;
        Ok(Completion {
            prompt_tokens: p.unwrap_or(prompt.estimated_tokens),
            completion_tokens: c.unwrap_or_else(|| estimate_tokens(&text)),
            text,
        })
    }
}

/// Hex SHA-256 of the system and user text.
pub fn prompt_key(prompt: &PromptBundle) -> String {
    let mut h = Sha256::new();
    h.update(prompt.system.as_bytes());
    h.update([0u8]);
    h.update(prompt.user.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Canned answers from `<dir>/<prompt_key>.txt`, falling back to
/// `<dir>/default.txt`.
pub struct MockBackend {
    dir: PathBuf,
}

impl MockBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MockBackend { dir: dir.into() }
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, prompt: &PromptBundle) -> Result<Completion, BackendError> {
        let key = prompt_key(prompt);
        for name in [format!("{key}.txt"), MOCK_DEFAULT_FILE.to_string()] {
            match std::fs::read_to_string(self.dir.join(&name)) {
                Ok(text) => return Ok(estimated(prompt, text)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                Err(e) => return Err(BackendError::Unavailable(format!("{name}: {e}"))),
            }
        }
        Err(BackendError::Unavailable(format!(
            "no canned answer for prompt {key} in {}",
            self.dir.display()
        )))
    }
}

/// Answers in order; records every prompt it receives.
pub struct ScriptedBackend {
    answers: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<PromptBundle>>,
}

impl ScriptedBackend {
    pub fn new(answers: Vec<String>) -> Self {
        ScriptedBackend {
            answers: Mutex::new(answers.into()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<PromptBundle> {
        self.seen.lock().expect("script lock").clone()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, prompt: &PromptBundle) -> Result<Completion, BackendError> {
        self.seen.lock().expect("script lock").push(prompt.clone());
        let text = self
            .answers
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| BackendError::Unavailable("script exhausted".into()))?;
        Ok(estimated(prompt, text))
    }
}
