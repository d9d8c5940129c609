//! Deterministic stand-in for the model endpoints, answering from corpus
//! ground truth.

mod registry;
mod server;

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::read_wav;
use crate::corpus::{events_by_conversation, Corpus, HdmEvent};
use crate::detectors::{
    ClassifyRequest, ClassifyResponse, DetectorError, ErrorBody, LogprobsRequest, LogprobsResponse, ModelClient,
    TranscribeRequest, TranscribeResponse, WindowMeta,
};
use crate::rng::rng_for;

pub use registry::{audio_hash, AudioHash, Registry, WindowKey};
pub use server::MockServer;

/// Lowest and highest probability the mock emits.
pub const P_FLOOR: f64 = 0.001;
pub const P_CEIL: f64 = 0.999;

#[derive(Debug, Error)]
pub enum MockError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unknown window: {0}")]
    UnknownWindow(String),
    #[error("invalid mock config: {0}")]
    Config(String),
    #[error("registry: {0}")]
    Registry(String),
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: String, message: String },
}

impl MockError {
    pub fn status(&self) -> u16 {
        match self {
            MockError::UnknownWindow(_) => 404,
            MockError::BadRequest(_) => 400,
            _ => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    pub word_drop_prob: f64,
    pub score_noise_sigma: f64,
    pub miscalibration_bias: f64,
    pub seed: u64,
    pub port: u16,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            word_drop_prob: 0.0,
            score_noise_sigma: 0.0,
            miscalibration_bias: 0.0,
            seed: 0,
            port: 8091,
        }
    }
}

impl MockConfig {
    pub fn validate(&self) -> Result<(), MockError> {
        if !(0.0..=1.0).contains(&self.word_drop_prob) {
            return Err(MockError::Config(format!("word drop probability {}", self.word_drop_prob)));
        }
        if !(self.score_noise_sigma >= 0.0 && self.score_noise_sigma.is_finite()) {
            return Err(MockError::Config(format!("noise sigma {}", self.score_noise_sigma)));
        }
        if !self.miscalibration_bias.is_finite() {
            return Err(MockError::Config("bias must be finite".into()));
        }
        Ok(())
    }
}

/// `conversation@end_ms`, the key for per-window randomness.
pub fn window_id(conversation_id: &str, end_s: f64) -> String {
    format!("{conversation_id}@{}", (end_s * 1000.0).round() as i64)
}

/// Drop each whitespace-separated word independently with probability `p`.
pub fn drop_words<R: Rng + ?Sized>(text: &str, p: f64, rng: &mut R) -> String {
    text.split_whitespace()
        .filter(|_| !rng.random_bool(p))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone)]
pub struct MockService {
    corpus: Corpus,
    events: BTreeMap<String, Vec<HdmEvent>>,
    registry: Registry,
    config: MockConfig,
}

impl MockService {
    pub fn new(corpus: Corpus, events: &[HdmEvent], registry: Registry, config: MockConfig) -> Result<Self, MockError> {
        config.validate()?;
        corpus
            .check_events(events)
            .map_err(|e| MockError::Config(format!("events do not match corpus: {e}")))?;
        Ok(Self {
            corpus,
            events: events_by_conversation(events),
            registry,
            config,
        })
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    fn resolve(&self, audio_b64: &str, meta: Option<&WindowMeta>) -> Result<WindowKey, MockError> {
        let bytes = B64
            .decode(audio_b64)
            .map_err(|e| MockError::BadRequest(format!("audio_b64: {e}")))?;
        if let Some(meta) = meta {
            if self.corpus.conversation(&meta.conversation_id).is_none() {
                return Err(MockError::UnknownWindow(format!(
                    "conversation {:?} not in corpus",
                    meta.conversation_id
                )));
            }
            let w = read_wav(&bytes).map_err(|e| MockError::BadRequest(format!("audio: {e}")))?;
            return Ok(WindowKey {
                conversation_id: meta.conversation_id.clone(),
                start_s: meta.end_time_s - w.duration_s(),
                end_s: meta.end_time_s,
            });
        }
        self.registry
            .lookup(&bytes)
            .cloned()
            .ok_or_else(|| MockError::UnknownWindow("audio fingerprint not registered".into()))
    }

    fn meta_only(&self, meta: &WindowMeta) -> Result<WindowKey, MockError> {
        if self.corpus.conversation(&meta.conversation_id).is_none() {
            return Err(MockError::UnknownWindow(format!(
                "conversation {:?} not in corpus",
                meta.conversation_id
            )));
        }
        Ok(WindowKey {
            conversation_id: meta.conversation_id.clone(),
            start_s: meta.end_time_s,
            end_s: meta.end_time_s,
        })
    }

    /// Noisy oracle probability for the window ending at `key.end_s`.
    pub fn probability(&self, key: &WindowKey) -> f64 {
        let positive = self
            .events
            .get(&key.conversation_id)
            .is_some_and(|evs| evs.iter().any(|e| e.contains_time(key.end_s)));
        let oracle = if positive { 1.0 } else { 0.0 };
        let noise = if self.config.score_noise_sigma > 0.0 {
            let mut rng = rng_for(self.config.seed, &["score", &window_id(&key.conversation_id, key.end_s)]);
            Normal::new(0.0, self.config.score_noise_sigma)
                .expect("validated sigma")
                .sample(&mut rng)
        } else {
            0.0
        };
        (oracle + noise + self.config.miscalibration_bias).clamp(P_FLOOR, P_CEIL)
    }

    pub fn handle_transcribe(&self, req: &TranscribeRequest) -> Result<TranscribeResponse, MockError> {
        let key = self.resolve(&req.audio_b64, req.meta.as_ref())?;
        let conv = self
            .corpus
            .conversation(&key.conversation_id)
            .ok_or_else(|| MockError::UnknownWindow(key.conversation_id.clone()))?;
        let text = conv
            .utterances
            .iter()
            .filter(|u| u.start_s < key.end_s && key.start_s < u.end_s)
            .map(|u| u.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let mut rng = rng_for(self.config.seed, &["transcribe", &window_id(&key.conversation_id, key.end_s)]);
        Ok(TranscribeResponse {
            transcript: drop_words(&text, self.config.word_drop_prob, &mut rng),
        })
    }

    pub fn handle_logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse, MockError> {
        let key = match (req.segments.last(), req.meta.as_ref()) {
            (Some(target), meta) => {
                if target.label.is_some() {
                    return Err(MockError::BadRequest("last segment must be the unlabeled target".into()));
                }
                self.resolve(&target.audio_b64, meta)?
            }
            (None, Some(meta)) => self.meta_only(meta)?,
            (None, None) => {
                return Err(MockError::BadRequest(
                    "text-only prompts need window meta to be scored by the mock".into(),
                ))
            }
        };
        let p = self.probability(&key);
        Ok(LogprobsResponse {
            logprob_p: p.ln(),
            logprob_n: (1.0 - p).ln(),
        })
    }

    pub fn handle_classify(&self, req: &ClassifyRequest) -> Result<ClassifyResponse, MockError> {
        let key = self.resolve(&req.audio_b64, req.meta.as_ref())?;
        Ok(ClassifyResponse {
            probability: self.probability(&key),
        })
    }

    /// Route one HTTP request to a handler. Returns status and JSON body.
    pub fn handle_http(&self, method: &str, path: &str, body: &[u8]) -> (u16, Vec<u8>) {
        fn run<Req, Resp>(body: &[u8], f: impl FnOnce(&Req) -> Result<Resp, MockError>) -> Result<Vec<u8>, MockError>
        where
            Req: for<'de> Deserialize<'de>,
            Resp: Serialize,
        {
            let req: Req = serde_json::from_slice(body).map_err(|e| MockError::BadRequest(e.to_string()))?;
            let resp = f(&req)?;
            Ok(serde_json::to_vec(&resp).expect("response serializes"))
        }
        let result = match (method, path) {
            ("POST", "/v1/transcribe") => run(body, |r| self.handle_transcribe(r)),
            ("POST", "/v1/logprobs") => run(body, |r| self.handle_logprobs(r)),
            ("POST", "/v1/classify") => run(body, |r| self.handle_classify(r)),
            (_, "/v1/transcribe" | "/v1/logprobs" | "/v1/classify") => {
                return (405, error_body("method not allowed"));
            }
            _ => return (404, error_body(&format!("no route for {path}"))),
        };
        match result {
            Ok(bytes) => (200, bytes),
            Err(e) => (e.status(), error_body(&e.to_string())),
        }
    }
}

fn error_body(message: &str) -> Vec<u8> {
    serde_json::to_vec(&ErrorBody {
        error: message.to_string(),
    })
    .expect("error body serializes")
}

fn to_detector_error(e: MockError) -> DetectorError {
    DetectorError::Http {
        status: e.status(),
        body: e.to_string(),
    }
}

/// In-process use without HTTP.
impl ModelClient for MockService {
    fn transcribe(&self, req: &TranscribeRequest) -> Result<TranscribeResponse, DetectorError> {
        self.handle_transcribe(req).map_err(to_detector_error)
    }

    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse, DetectorError> {
        self.handle_logprobs(req).map_err(to_detector_error)
    }

    fn classify(&self, req: &ClassifyRequest) -> Result<ClassifyResponse, DetectorError> {
        self.handle_classify(req).map_err(to_detector_error)
    }
}
