//! Chat-completion client.
//!
//! Wire format: `POST {endpoint}` with a JSON body
//! `{"model": .., "temperature": .., "messages": [{"role": .., "content": ..}]}`
//! and `Authorization: Bearer <key>`. The reply must carry
//! `choices[0].message.content`. Transport errors, 408, 429 and 5xx are
//! retried with exponential backoff; the whole call, backoff included, is
//! bounded by `timeout * (max_retries + 1)`.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{BackendConfig, Message, Policy, PolicyError, PromptBundle};

/// Counting semaphore capping concurrent requests.
pub struct InFlightLimiter {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a InFlightLimiter);

impl InFlightLimiter {
    pub fn new(slots: usize) -> InFlightLimiter {
        InFlightLimiter { free: Mutex::new(slots.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("limiter lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("limiter lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("limiter lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Append-only JSON-lines log of every attempt. The API key is scrubbed
/// from everything written and headers are never logged.
struct RequestLog {
    file: Mutex<File>,
    secret: String,
}

impl RequestLog {
    fn open(dir: &std::path::Path, secret: &str) -> std::io::Result<RequestLog> {
        fs::create_dir_all(dir)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("requests.jsonl"))?;
        Ok(RequestLog { file: Mutex::new(file), secret: secret.to_string() })
    }

    fn write(&self, entry: &Value) {
        let mut line = entry.to_string();
        if !self.secret.is_empty() {
            line = line.replace(&self.secret, "[REDACTED]");
        }
        let mut file = self.file.lock().expect("log lock");
        if let Err(e) = writeln!(file, "{line}") {
            tracing::warn!("request log write failed: {e}");
        }
    }
}

pub struct RemoteChatPolicy {
    config: BackendConfig,
    endpoint: String,
    model: String,
    api_key: String,
    agent: ureq::Agent,
    limiter: Arc<InFlightLimiter>,
    log: Option<RequestLog>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(PolicyError),
}

impl RemoteChatPolicy {
    pub fn new(config: BackendConfig, limiter: Arc<InFlightLimiter>) -> Result<RemoteChatPolicy, PolicyError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env_var)
            .map_err(|_| PolicyError::MissingApiKey(config.api_key_env_var.clone()))?;
        let log = match &config.log_dir {
            Some(dir) => Some(
                RequestLog::open(dir, &api_key).map_err(|e| PolicyError::Io(format!("{}: {e}", dir.display())))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteChatPolicy {
            endpoint: config.endpoint.clone().expect("validated"),
            model: config.model_name.clone().expect("validated"),
            config,
            api_key,
            agent,
            limiter,
            log,
        })
    }

    pub fn request_body(&self, messages: &[Message]) -> Value {
        json!({
            "model": self.model,
            "temperature": self.config.temperature,
            "messages": messages,
        })
    }

    fn attempt(&self, body: &Value, timeout: Duration) -> Attempt {
        let sent = self
            .agent
            .post(&self.endpoint)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut response = match sent {
            Ok(r) => r,
            Err(e @ (ureq::Error::BadUri(_) | ureq::Error::Http(_))) => {
                return Attempt::Fatal(PolicyError::Config(e.to_string()))
            }
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        if let Some(log) = &self.log {
            log.write(&json!({ "event": "response", "status": status, "body": text }));
        }
        match status {
            200..=299 => match extract_content(&text) {
                Some(content) => Attempt::Done(content),
                None => Attempt::Fatal(PolicyError::MalformedResponse(truncate(&text))),
            },
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
            _ => Attempt::Fatal(PolicyError::Http { status, body: truncate(&text) }),
        }
    }
}

fn truncate(text: &str) -> String {
    text.chars().take(300).collect()
}

/// `choices[0].message.content` of a chat-completion reply.
pub fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

impl Policy for RemoteChatPolicy {
    fn name(&self) -> &'static str {
        "remote_chat"
    }

    fn next_action(&mut self, bundle: &PromptBundle) -> Result<String, PolicyError> {
        self.complete(&bundle.messages_within(self.config.char_budget))
    }

    fn complete(&mut self, messages: &[Message]) -> Result<String, PolicyError> {
        let _permit = self.limiter.acquire();
        let body = self.request_body(messages);
        let per_attempt = self.config.timeout;
        let deadline = Instant::now() + per_attempt * (self.config.max_retries + 1);
        let mut attempts = 0u32;
                loop {
            let now = Instant::now();
            if now >= deadline {
                return Err(PolicyError::Timeout { attempts });
            }
            attempts += 1;
            if let Some(log) = &self.log {
                log.write(&json!({ "event": "request", "attempt": attempts, "body": body }));
            }
            match self.attempt(&body, per_attempt.min(deadline - now)) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(reason) => {
                    tracing::debug!(attempts, %reason, "transient backend failure");
                    if let Some(log) = &self.log {
                        log.write(&json!({ "event": "retry", "attempt": attempts, "reason": reason }));
                    }
                    if attempts > self.config.max_retries {
                        return Err(PolicyError::Transport { attempts, message: reason });
                    }
                }
            }
            let backoff = Duration::from_millis(
                self.config
                    .backoff_base_ms
                    .saturating_mul(1u64 << (attempts - 1).min(16)),
            );
            let remaining = deadline.saturating_duration_since(Instant::now());
            std::thread::sleep(backoff.min(remaining));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"look()"}}]}"#;
        assert_eq!(extract_content(body).as_deref(), Some("look()"));
        assert_eq!(extract_content(r#"{"choices":[]}"#), None);
        assert_eq!(extract_content("not json"), None);
    }

    #[test]
    fn limiter_caps_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let limiter = Arc::new(InFlightLimiter::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (limiter, active, peak) = (limiter.clone(), active.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = limiter.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    active.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
