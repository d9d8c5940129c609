//! Detection of hearing-difficulty moments in conversational audio.
//!
//! The crate covers the whole pipeline:
//!
//! - [`corpus`]: dialog-act-annotated conversations, act-tag mapping and
//!   extraction of refined hearing-difficulty events.
//! - [`timeline`]: frame-level label propagation and sampling of labeled
//!   context-window examples.
//! - [`audio`]: WAV I/O, resampling, slicing and the probabilistic
//!   augmentation pipeline (noise, time stretch, pitch shift).
//! - [`detectors`]: hotword heuristic, prompted audio/text LM scoring and
//!   classifier clients over a small HTTP protocol.
//! - [`mocksvc`]: a deterministic local implementation of that protocol.
//! - [`streamer`]: continuous sliding-window scoring with CSV/SVG output.
//! - [`eval`]: Monte Carlo cross-validation, F1/PR metrics and the
//!   corrected resampled t-test.
//! - [`export`]: balanced fine-tuning records.
//! - [`synth`]: synthetic conversations with audio for tests and demos.

pub mod audio;
pub mod corpus;
pub mod detectors;
pub mod eval;
pub mod export;
pub mod mocksvc;
pub mod rng;
pub mod streamer;
pub mod synth;
pub mod timeline;

pub use audio::{AudioError, AudioStore, AugmentConfig, Waveform};
pub use corpus::{
    ActTagMap, Conversation, Corpus, CorpusError, CorpusFormat, HdmEvent, RefinementList,
    StatsReport, Utterance,
};
pub use detectors::{
    Detector, DetectorConfig, DetectorError, DetectorKind, HotwordLexicon, ModelClient, Score,
    WindowInput,
};
pub use eval::{EvalError, EvalReport, FoldResult, MccvConfig, SplitPlan, TTestResult};
pub use mocksvc::{MockConfig, MockServer, MockService, Registry};
pub use streamer::{Signal, StreamConfig};
pub use timeline::{Dataset, ExampleSpec, FrameTimeline, Label, SamplingConfig, TimelineError};

/// Canonical sample rate every detector receives.
pub const CANONICAL_RATE_HZ: u32 = 16_000;

/// Act tag marking utterances such as "Huh?" or "What?".
pub const SIGNAL_NON_UNDERSTANDING: &str = "signal-non-understanding";

/// Version string recorded in reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
