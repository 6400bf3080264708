use std::time::Duration;

use serde_json::Value;

use super::ProviderError;

#[derive(Debug, Clone, PartialEq)]
pub enum TransportFailure {
    /// Connection-level failure (DNS, refused, timeout, bad body).
    Network(String),
    Status { code: u16, body: String },
    /// Network access is switched off.
    Disabled,
}

/// Minimal JSON-over-HTTP surface the providers need.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value, TransportFailure>;

    fn is_disabled(&self) -> bool {
        false
    }
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Config(format!("HTTP client: {e}")))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value, TransportFailure> {
        let mut req = self.client.post(url).json(body);
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| TransportFailure::Network(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportFailure::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportFailure::Status { code: status.as_u16(), body: text });
        }
        serde_json::from_str(&text).map_err(|e| TransportFailure::Network(format!("invalid JSON body: {e}")))
    }
}

/// Refuses every request; used for offline runs.
#[derive(Debug, Default, Clone, Copy)]
pub struct DisabledTransport;

impl Transport for DisabledTransport {
    fn post_json(&self, _url: &str, _bearer: Option<&str>, _body: &Value) -> Result<Value, TransportFailure> {
        Err(TransportFailure::Disabled)
    }

    fn is_disabled(&self) -> bool {
        true
    }
}

/// Retries transport and 5xx failures with exponential backoff; 4xx responses
/// fail immediately.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; no delay before the first try.
        if attempt <= 1 {
            Duration::ZERO
        } else {
            self.base_delay * 2u32.pow(attempt - 2)
        }
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

pub fn post_with_retry(
    transport: &dyn Transport,
    policy: &RetryPolicy,
    url: &str,
    bearer: Option<&str>,
    body: &Value,
) -> Result<Value, ProviderError> {
    let max = policy.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=max {
        let wait = policy.delay_before(attempt);
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
        match transport.post_json(url, bearer, body) {
            Ok(v) => return Ok(v),
            Err(TransportFailure::Disabled) => {
                return Err(ProviderError::Transport { attempts: attempt, message: "network access disabled".into() })
            }
            Err(TransportFailure::Status { code, body }) if (400..500).contains(&code) => {
                return Err(ProviderError::Http { status: code, message: truncate(&body, 500).to_string() })
            }
            Err(TransportFailure::Status { code, body }) => {
                last = format!("HTTP {code}: {}", truncate(&body, 200));
            }
            Err(TransportFailure::Network(msg)) => last = msg,
        }
        log::warn!("request to {url} failed (attempt {attempt}/{max}): {last}");
    }
    Err(ProviderError::Transport { attempts: max, message: last })
}
