//! Frame-level label propagation and sampling of labeled context windows.

mod batches;
mod sampling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, HdmEvent};

pub use batches::{balanced_batches, BalancedBatches};
pub use sampling::{
    build_dataset, feasible_negative_mass, sample_negative_timesteps, sample_positive_timesteps,
    PositiveDraw,
};

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("frame_ms must be positive")]
    InvalidFrame,
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
    #[error("conversation {conversation_id:?}: could not place {requested} negatives after {attempts} attempts (feasible decision-time mass {feasible_mass_s:.3} s of {span_s:.3} s)")]
    Infeasible {
        conversation_id: String,
        requested: usize,
        attempts: usize,
        feasible_mass_s: f64,
        span_s: f64,
    },
    #[error("batch size must be even and at least 2, got {0}")]
    InvalidBatchSize(usize),
    #[error("dataset has no {0} examples")]
    MissingClass(Label),
    #[error("dataset line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// The single-token class name used in prompts and fine-tune exports.
    pub fn token(self) -> &'static str {
        match self {
            Self::Positive => "P",
            Self::Negative => "N",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Self::Positive
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub context_s: f64,
    pub min_elapsed_s: f64,
    pub neg_ratio: usize,
    pub frame_ms: u32,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            context_s: 4.0,
            min_elapsed_s: 0.4,
            neg_ratio: 10,
            frame_ms: 100,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), TimelineError> {
        if !(self.context_s > 0.0 && self.context_s.is_finite()) {
            return Err(TimelineError::InvalidConfig("context_s must be positive".into()));
        }
        if !(self.min_elapsed_s >= 0.0 && self.min_elapsed_s.is_finite()) {
            return Err(TimelineError::InvalidConfig("min_elapsed_s must be non-negative".into()));
        }
        if self.neg_ratio < 1 {
            return Err(TimelineError::InvalidConfig("neg_ratio must be at least 1".into()));
        }
        if self.frame_ms == 0 {
            return Err(TimelineError::InvalidFrame);
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// A decision timestep and the context window that precedes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub conversation_id: String,
    pub t_s: f64,
    pub label: Label,
    pub context_start_s: f64,
    pub context_end_s: f64,
    /// Positive drawn from an event shorter than the elapsed rule, placed
    /// at the event end.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub short_event: bool,
}

impl ExampleSpec {
    pub(crate) fn at(conversation_id: &str, t_s: f64, context_s: f64, label: Label) -> Self {
        Self {
            conversation_id: conversation_id.to_string(),
            t_s,
            label,
            context_start_s: t_s - context_s,
            context_end_s: t_s,
            short_event: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<ExampleSpec>,
    pub config: SamplingConfig,
    pub provenance: Provenance,
    /// Events dropped because their context would start before time 0.
    pub dropped_events: usize,
}

impl Dataset {
    pub fn positives(&self) -> impl Iterator<Item = &ExampleSpec> {
        self.examples.iter().filter(|e| e.label.is_positive())
    }

    pub fn negatives(&self) -> impl Iterator<Item = &ExampleSpec> {
        self.examples.iter().filter(|e| !e.label.is_positive())
    }

    pub fn positive_count(&self) -> usize {
        self.positives().count()
    }

    pub fn negative_count(&self) -> usize {
        self.negatives().count()
    }

    /// Dataset file: JSONL, one example per line.
    pub fn to_jsonl(&self) -> Vec<u8> {
        write_examples(&self.examples)
    }
}

pub fn write_examples(examples: &[ExampleSpec]) -> Vec<u8> {
    let mut out = Vec::new();
    for ex in examples {
        serde_json::to_writer(&mut out, ex).expect("example serializes");
        out.push(b'\n');
    }
    out
}

pub fn read_examples(bytes: &[u8]) -> Result<Vec<ExampleSpec>, TimelineError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TimelineError::Malformed {
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| TimelineError::Malformed {
            line: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Boolean label per fixed-length frame of one conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTimeline {
    pub conversation_id: String,
    pub frame_ms: u32,
    pub labels: Vec<bool>,
}

pub fn frame_count(duration_s: f64, frame_ms: u32) -> usize {
    let frames = duration_s * 1000.0 / f64::from(frame_ms);
    // Tolerate representation error such as 12.3 * 1000 = 12300.000000000002.
    (frames - 1e-9).ceil().max(0.0) as usize
}

fn frame_bounds_s(i: usize, frame_ms: u32) -> (f64, f64) {
    let f = u64::from(frame_ms);
    ((i as u64 * f) as f64 / 1000.0, ((i as u64 + 1) * f) as f64 / 1000.0)
}

/// Frame `i` is positive iff `[i·frame, (i+1)·frame)` overlaps some event
/// with positive length.
pub fn propagate_labels(
    events: &[HdmEvent],
    duration_s: f64,
    frame_ms: u32,
) -> Result<FrameTimeline, TimelineError> {
    if frame_ms == 0 {
        return Err(TimelineError::InvalidFrame);
    }
    let len = frame_count(duration_s, frame_ms);
    let mut labels = vec![false; len];
    let frame_s = f64::from(frame_ms) / 1000.0;
    for ev in events {
        if len == 0 || !(ev.end_s > ev.start_s) {
            continue;
        }
        // Candidate range from division, widened by one frame on each side;
        // the exact overlap predicate settles the boundary frames.
        let first = ((ev.start_s / frame_s).floor().max(0.0) as usize).saturating_sub(1);
        let last = ((ev.end_s / frame_s).ceil().max(0.0) as usize + 1).min(len);
        for (i, label) in labels.iter_mut().enumerate().take(last).skip(first) {
            let (fs, fe) = frame_bounds_s(i, frame_ms);
            if fs < ev.end_s && ev.start_s < fe {
                *label = true;
            }
        }
    }
    Ok(FrameTimeline {
        conversation_id: events
            .first()
            .map(|e| e.conversation_id.clone())
            .unwrap_or_default(),
        frame_ms,
        labels,
    })
}
