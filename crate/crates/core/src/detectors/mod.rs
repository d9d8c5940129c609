//! Detector abstraction: hotword heuristic, prompted LM scoring over audio
//! or transcripts, and a plain classifier client.

mod client;
mod detector;
mod hotword;
mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioError, Waveform};
use crate::timeline::Label;

pub use client::{
    ClassifyRequest, ClassifyResponse, ErrorBody, HttpClient, LogprobsRequest, LogprobsResponse,
    ModelClient, SegmentPayload, TranscribeRequest, TranscribeResponse, WindowMeta,
};
pub use detector::{Detector, DetectorConfig, DetectorKind};
pub use hotword::{detect_hotword, normalize_transcript, HotwordLexicon, MAX_PHRASE_TOKENS};
pub use prompt::{
    assemble_fewshot, build_prompt, pn_probability, FewShotSet, PromptPayload, PromptTemplate,
    PromptVariant, ShotContent,
};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("degenerate logprobs: {0}")]
    DegenerateLogprobs(String),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("few-shot count must be even, got {0}")]
    OddShotCount(usize),
    #[error("need {needed} {label:?} examples for few-shot, only {available} available")]
    InsufficientExamples {
        label: Label,
        needed: usize,
        available: usize,
    },
    #[error("modality mismatch: {0}")]
    ModalityMismatch(String),
    #[error("no endpoint configured for {0} detector")]
    MissingEndpoint(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {0} s")]
    Timeout(f64),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Probability of the positive class.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Score(f64);

impl Score {
    pub const ZERO: Score = Score(0.0);
    pub const ONE: Score = Score(1.0);

    pub fn new(value: f64) -> Result<Self, DetectorError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Score(value))
        } else {
            Err(DetectorError::InvalidScore(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Score {
    type Error = DetectorError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Score::new(value)
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

/// One scoring request: context audio ending at `end_time_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowInput {
    pub waveform: Waveform,
    pub transcript: Option<String>,
    pub end_time_s: f64,
    /// Source conversation, when known. Sent to endpoints only if the
    /// detector is configured to attach window metadata.
    pub conversation_id: Option<String>,
}

impl WindowInput {
    pub fn new(waveform: Waveform, end_time_s: f64) -> Self {
        Self {
            waveform,
            transcript: None,
            end_time_s,
            conversation_id: None,
        }
    }

    pub fn with_conversation(mut self, id: impl Into<String>) -> Self {
        self.conversation_id = Some(id.into());
        self
    }

    pub fn with_transcript(mut self, text: impl Into<String>) -> Self {
        self.transcript = Some(text.into());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_bounds() {
        assert!(Score::new(0.0).is_ok());
        assert!(Score::new(1.0).is_ok());
        assert!(Score::new(1.0001).is_err());
        assert!(Score::new(f64::NAN).is_err());
        assert!(serde_json::from_str::<Score>("1.5").is_err());
        assert_eq!(serde_json::to_string(&Score::new(0.25).unwrap()).unwrap(), "0.25");
    }
}
