//! Wire types and the HTTP model client.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::DetectorError;

/// Optional side channel locating a window in its source conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMeta {
    pub conversation_id: String,
    pub end_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscribeRequest {
    pub audio_b64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<WindowMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscribeResponse {
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPayload {
    pub audio_b64: String,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobsRequest {
    pub prompt: String,
    pub segments: Vec<SegmentPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<WindowMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobsResponse {
    pub logprob_p: f64,
    pub logprob_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub audio_b64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<WindowMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Anything that answers the three model endpoints.
pub trait ModelClient: Send + Sync {
    fn transcribe(&self, req: &TranscribeRequest) -> Result<TranscribeResponse, DetectorError>;
    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse, DetectorError>;
    fn classify(&self, req: &ClassifyRequest) -> Result<ClassifyResponse, DetectorError>;
}

/// Blocking JSON-over-HTTP client. Connection failures and 5xx responses
/// are retried with exponential backoff; 4xx and timeouts are not.
#[derive(Debug, Clone)]
pub struct HttpClient {
    base_url: String,
    agent: ureq::Agent,
    timeout: Duration,
    max_retries: u32,
    backoff: Duration,
}

impl HttpClient {
    pub fn new(base_url: &str, timeout: Duration, max_retries: u32, backoff: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent: config.into(),
            timeout,
            max_retries,
            backoff,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, DetectorError> {
        let url = format!("{}{}", self.base_url, path);
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let retryable = match self.agent.post(&url).send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().map_err(|e| self.map_err(e, attempt))?;
                    if (200..300).contains(&status) {
                        return serde_json::from_str(&text)
                            .map_err(|e| DetectorError::MalformedResponse(format!("{path}: {e}")));
                    }
                    let err = DetectorError::Http { status, body: text };
                    if status < 500 {
                        return Err(err);
                    }
                    err
                }
                Err(ureq::Error::Timeout(_)) => return Err(DetectorError::Timeout(self.timeout.as_secs_f64())),
                Err(e) => DetectorError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                },
            };
            if attempt > self.max_retries {
                return Err(match retryable {
                    DetectorError::Http { status, body } => DetectorError::Transport {
                        attempts: attempt,
                        message: format!("HTTP {status}: {body}"),
                    },
                    other => other,
                });
            }
            log::debug!("{url}: attempt {attempt} failed ({retryable}), retrying");
            thread::sleep(self.backoff * 2u32.pow(attempt - 1));
        }
    }

    fn map_err(&self, e: ureq::Error, attempts: u32) -> DetectorError {
        match e {
            ureq::Error::Timeout(_) => DetectorError::Timeout(self.timeout.as_secs_f64()),
            other => DetectorError::Transport {
                attempts,
                message: other.to_string(),
            },
        }
    }
}

impl ModelClient for HttpClient {
    fn transcribe(&self, req: &TranscribeRequest) -> Result<TranscribeResponse, DetectorError> {
        self.post("/v1/transcribe", req)
    }

    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse, DetectorError> {
        self.post("/v1/logprobs", req)
    }

    fn classify(&self, req: &ClassifyRequest) -> Result<ClassifyResponse, DetectorError> {
        self.post("/v1/classify", req)
    }
}
