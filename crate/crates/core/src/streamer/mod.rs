//! Sliding-window scoring over a whole recording, with CSV and SVG output.

mod plot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{resample, AudioError, Waveform};
use crate::corpus::HdmEvent;
use crate::detectors::{Detector, DetectorError, WindowInput};
use crate::CANONICAL_RATE_HZ;

pub use plot::render_plot_svg;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("audio is {duration_s} s long, shorter than the {window_s} s window")]
    AudioTooShort { duration_s: f64, window_s: f64 },
    #[error("invalid stream config: {0}")]
    InvalidConfig(String),
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal CSV line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub window_s: f64,
    pub hop_ms: u32,
    /// Attached to each window so endpoints can locate it.
    pub conversation_id: Option<String>,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            window_s: 4.0,
            hop_ms: 1000,
            conversation_id: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalPoint {
    pub t_s: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub points: Vec<SignalPoint>,
    pub window_s: f64,
    pub hop_ms: u32,
    pub ground_truth: Option<Vec<HdmEvent>>,
}

impl Signal {
    pub fn with_ground_truth(mut self, events: Vec<HdmEvent>) -> Self {
        self.ground_truth = Some(events);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether `t_s` falls inside a ground-truth event; `None` without
    /// ground truth.
    pub fn in_event(&self, t_s: f64) -> Option<bool> {
        self.ground_truth
            .as_ref()
            .map(|evs| evs.iter().any(|e| e.contains_time(t_s)))
    }
}

/// Window end times in whole milliseconds: `window, window + hop, ...`
/// up to the audio duration.
pub fn evaluation_points_ms(duration_s: f64, window_s: f64, hop_ms: u32) -> Vec<u64> {
    let window_ms = (window_s * 1000.0).round() as u64;
    let duration_ms = (duration_s * 1000.0 + 1e-6).floor() as u64;
    if duration_ms < window_ms || hop_ms == 0 {
        return Vec::new();
    }
    (window_ms..=duration_ms).step_by(hop_ms as usize).collect()
}

/// Score every full window; no padding before the first.
pub fn stream_scores(audio: &Waveform, detector: &Detector, config: &StreamConfig) -> Result<Signal, StreamError> {
    if !(config.window_s > 0.0 && config.window_s.is_finite()) {
        return Err(StreamError::InvalidConfig(format!("window {} s", config.window_s)));
    }
    if config.hop_ms == 0 {
        return Err(StreamError::InvalidConfig("hop must be at least 1 ms".into()));
    }
    let audio = if audio.sample_rate_hz() == CANONICAL_RATE_HZ {
        audio.clone()
    } else {
        resample(audio, CANONICAL_RATE_HZ)
    };
    let duration_s = audio.duration_s();
    let points = evaluation_points_ms(duration_s, config.window_s, config.hop_ms);
    if points.is_empty() {
        return Err(StreamError::AudioTooShort {
            duration_s,
            window_s: config.window_s,
        });
    }
    let windows = points
        .iter()
        .map(|&ms| {
            let t = ms as f64 / 1000.0;
            let w = audio.slice((t - config.window_s).max(0.0), t)?;
            let mut input = WindowInput::new(w, t);
            input.conversation_id = config.conversation_id.clone();
            Ok(input)
        })
        .collect::<Result<Vec<_>, AudioError>>()?;
    let scores = detector.score_windows(&windows);
    let points = points
        .iter()
        .zip(scores)
        .map(|(&ms, s)| {
            Ok(SignalPoint {
                t_s: ms as f64 / 1000.0,
                score: s?.value(),
            })
        })
        .collect::<Result<Vec<_>, DetectorError>>()?;
    Ok(Signal {
        points,
        window_s: config.window_s,
        hop_ms: config.hop_ms,
        ground_truth: None,
    })
}

/// `t_s,score,ground_truth`; the last column is empty without ground truth.
pub fn export_signal_csv(signal: &Signal) -> Vec<u8> {
    let mut out = String::from("t_s,score,ground_truth\n");
    for p in &signal.points {
        let gt = match signal.in_event(p.t_s) {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        out.push_str(&format!("{:.3},{},{}\n", p.t_s, p.score, gt));
    }
    out.into_bytes()
}

/// Parsed signal CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalCsv {
    pub points: Vec<SignalPoint>,
    pub ground_truth: Option<Vec<bool>>,
}

pub fn parse_signal_csv(bytes: &[u8]) -> Result<SignalCsv, StreamError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| StreamError::Malformed { line: 1, message: e.to_string() })?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["t_s", "score", "ground_truth"] {
        return Err(StreamError::Malformed {
            line: 1,
            message: "expected header t_s,score,ground_truth".into(),
        });
    }
    let mut points = Vec::new();
    let mut flags = Vec::new();
    let mut any_empty = false;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let bad = |m: String| StreamError::Malformed { line, message: m };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |idx: usize, name: &str| -> Result<f64, StreamError> {
            rec.get(idx)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| bad(format!("{name}: {e}")))
        };
        let t_s = num(0, "t_s")?;
        let score = num(1, "score")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(bad(format!("score {score} outside [0, 1]")));
        }
        if points.last().is_some_and(|p: &SignalPoint| p.t_s >= t_s) {
            return Err(bad("t_s must strictly increase".into()));
        }
        match rec.get(2).unwrap_or("") {
            "" => any_empty = true,
            "1" => flags.push(true),
            "0" => flags.push(false),
            other => return Err(bad(format!("ground_truth must be 0, 1 or empty, got {other:?}"))),
        }
        points.push(SignalPoint { t_s, score });
    }
    if any_empty && !flags.is_empty() {
        return Err(StreamError::Malformed {
            line: 0,
            message: "ground_truth column is partially filled".into(),
        });
    }
    Ok(SignalCsv {
        ground_truth: (!any_empty && !points.is_empty()).then_some(flags),
        points,
    })
}
