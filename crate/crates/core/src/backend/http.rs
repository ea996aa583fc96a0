//! Live HTTP chat-completion backend.
//!
//! Wire format: POST to the configured endpoint with a JSON body
//! `{"model", "messages": [{"role": "user", "content": <prompt>}],
//! "temperature", "max_tokens", "n"}` and a bearer token read from the
//! environment. Response parsing tolerates both chat-style choices
//! (`choices[].message.content`) and text-style choices (`choices[].text`).
//!
//! The endpoint comes from the config or the `TSFH_API_BASE` environment
//! variable; the token from the variable named by `api_key_env`
//! (default `TSFH_API_KEY`). Retries follow the configured backoff
//! schedule on transport errors, HTTP 429, and 5xx; other statuses fail
//! immediately. A sliding-window rate limiter caps issued requests.

use super::{
    request_hash, now_rfc3339, Backend, BackendConfig, BackendError, Completion, TaskMeta,
    TokenUsage,
};
use serde::Deserialize;
use serde_json::json;
use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub const ENDPOINT_ENV: &str = "TSFH_API_BASE";
pub const DEFAULT_API_KEY_ENV: &str = "TSFH_API_KEY";

pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    config: BackendConfig,
    id: String,
    limiter: Option<Mutex<VecDeque<Instant>>>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    #[serde(default)]
    message: Option<Message>,
    #[serde(default)]
    text: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Message {
    content: String,
}

#[derive(Debug, Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpChatBackend {
    pub fn new(
        endpoint: Option<String>,
        api_key_env: Option<String>,
        config: BackendConfig,
    ) -> Result<Self, BackendError> {
        let endpoint = match endpoint.or_else(|| std::env::var(ENDPOINT_ENV).ok()) {
            Some(e) => e,
            None => {
                return Err(BackendError::InvalidConfig(format!(
                    "no endpoint configured and {ENDPOINT_ENV} is unset"
                )))
            }
        };
        let key_var = api_key_env.unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string());
        let api_key = std::env::var(&key_var).ok();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::InvalidConfig(format!("http client: {e}")))?;
        let id = format!("http:{}", config.model_id);
        let limiter = config.rate_limit.map(|_| Mutex::new(VecDeque::new()));
        Ok(Self {
            client,
            endpoint,
            api_key,
            config,
            id,
            limiter,
        })
    }

    fn wait_for_rate_limit(&self) {
        let (Some(limiter), Some(limit)) = (&self.limiter, self.config.rate_limit) else {
            return;
        };
        let window = Duration::from_millis(limit.window_ms);
        loop {
            let sleep_for = {
                let mut issued = limiter.lock().expect("rate limiter lock poisoned");
                let now = Instant::now();
                while let Some(front) = issued.front() {
                    if now.duration_since(*front) >= window {
                        issued.pop_front();
                    } else {
                        break;
                    }
                }
                if (issued.len() as u32) < limit.max_requests {
                    issued.push_back(now);
                    None
                } else {
                    let oldest = *issued.front().expect("non-empty at limit");
                    Some(window.saturating_sub(now.duration_since(oldest)))
                }
            };
            match sleep_for {
                None => return,
                Some(d) => std::thread::sleep(d.max(Duration::from_millis(1))),
            }
        }
    }

    fn issue_once(&self, prompt: &str, samples: u32) -> Result<(ChatResponse, u64), HttpFailure> {
        self.wait_for_rate_limit();
        let body = json!({
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "n": samples,
        });
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let started = Instant::now();
        let response = request
            .send()
            .map_err(|e| HttpFailure::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .text()
            .map_err(|e| HttpFailure::Transport(e.to_string()))?;
        let latency_ms = started.elapsed().as_millis() as u64;
        match status {
            200..=299 => {
                let parsed: ChatResponse = serde_json::from_str(&text)
                    .map_err(|e| HttpFailure::Fatal(status, format!("bad payload: {e}")))?;
                Ok((parsed, latency_ms))
            }
            429 => Err(HttpFailure::RateLimited(text)),
            500..=599 => Err(HttpFailure::Server(status, text)),
            _ => Err(HttpFailure::Fatal(status, text)),
        }
    }
}

enum HttpFailure {
    Transport(String),
    RateLimited(String),
    Server(u16, String),
    Fatal(u16, String),
}

impl Backend for HttpChatBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        prompt: &str,
        _meta: &TaskMeta<'_>,
        samples: u32,
    ) -> Result<Vec<Completion>, BackendError> {
        let retry = &self.config.retry;
        let mut last_failure: Option<HttpFailure> = None;
        for attempt in 0..retry.max_attempts {
            if attempt > 0 {
                let idx = (attempt as usize - 1).min(retry.backoff_ms.len().saturating_sub(1));
                let delay = retry.backoff_ms.get(idx).copied().unwrap_or(0);
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.issue_once(prompt, samples) {
                Ok((response, latency_ms)) => {
                    let created_at = now_rfc3339();
                    let usage = response.usage.map(|u| TokenUsage {
                        prompt_tokens: u.prompt_tokens,
                        completion_tokens: u.completion_tokens,
                    });
                    let mut completions = Vec::with_capacity(samples as usize);
                    for (i, choice) in response.choices.into_iter().take(samples as usize).enumerate()
                    {
                        let text = choice
                            .message
                            .map(|m| m.content)
                            .or(choice.text)
                            .unwrap_or_default();
                        completions.push(Completion {
                            text,
                            backend_id: self.id.clone(),
                            request_hash: request_hash(
                                prompt,
                                &self.config.model_id,
                                self.config.temperature,
                                i as u32,
                            ),
                            latency_ms,
                            token_usage: usage,
                            created_at: created_at.clone(),
                        });
                    }
                    if completions.is_empty() {
                        return Err(BackendError::Provider {
                            status: 200,
                            message: "response contained no choices".to_string(),
                        });
                    }
                    return Ok(completions);
                }
                Err(HttpFailure::Fatal(status, message)) => {
                    return Err(BackendError::Provider { status, message });
                }
                Err(failure) => last_failure = Some(failure),
            }
        }
        Err(match last_failure {
            Some(HttpFailure::RateLimited(message)) => BackendError::RateLimited { message },
            Some(HttpFailure::Server(status, message))
            | Some(HttpFailure::Fatal(status, message)) => {
                BackendError::Provider { status, message }
            }
            Some(HttpFailure::Transport(message)) => BackendError::Network {
                attempts: retry.max_attempts,
                message,
            },
            None => BackendError::Network {
                attempts: retry.max_attempts,
                message: "no attempt issued".to_string(),
            },
        })
    }
}
