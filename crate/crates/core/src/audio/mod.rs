//! Waveforms, WAV I/O, resampling and augmentation.

mod augment;
mod resample;
mod store;
mod vocoder;
mod wav;

use thiserror::Error;

pub use augment::{add_noise, augment, augment_with, AugmentConfig, AugmentOverrides, AugmentTrace};
pub use resample::{resample, resample_by_ratio, SINC_TAPS};
pub use store::AudioStore;
pub use vocoder::{pitch_shift, time_stretch, VOCODER_HOP, VOCODER_WINDOW};
pub use wav::{encode_window_wav, read_wav, write_wav, WavEncoding};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedCodec(String),
    #[error("truncated or malformed WAV data: {0}")]
    Truncated(String),
    #[error("sample rate must be positive")]
    InvalidRate,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("interval [{start_s}, {end_s}] outside waveform of {duration_s} s")]
    OutOfRange {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no audio for conversation {0:?}")]
    MissingAudio(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Mono sample buffer with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn silence(duration_s: f64, sample_rate_hz: u32) -> Self {
        let n = (duration_s * f64::from(sample_rate_hz)).round() as usize;
        Self {
            samples: vec![0.0; n],
            sample_rate_hz,
        }
    }

    /// Construct from values produced by our own DSP, replacing anything
    /// non-finite with 0.
    pub(crate) fn from_dsp(samples: Vec<f32>, sample_rate_hz: u32) -> Self {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_finite() { s } else { 0.0 })
            .collect();
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn clamped(mut self) -> Self {
        for s in &mut self.samples {
            *s = s.clamp(-1.0, 1.0);
        }
        self
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    /// Sample-exact sub-range of `round((end - start) * rate)` samples
    /// starting at `round(start * rate)`.
    pub fn slice(&self, start_s: f64, end_s: f64) -> Result<Waveform, AudioError> {
        let duration_s = self.duration_s();
        let out_of_range = || AudioError::OutOfRange {
            start_s,
            end_s,
            duration_s,
        };
        const EPS: f64 = 1e-9;
        if !(start_s >= -EPS && start_s < end_s && end_s <= duration_s + EPS) {
            return Err(out_of_range());
        }
        let rate = f64::from(self.sample_rate_hz);
        let len = ((end_s - start_s) * rate).round() as usize;
        let mut start = (start_s.max(0.0) * rate).round() as usize;
        // Both ends rounded independently can overshoot by one sample.
        if start + len == self.samples.len() + 1 {
            start -= 1;
        }
        if start + len > self.samples.len() {
            return Err(out_of_range());
        }
        Ok(Waveform {
            samples: self.samples[start..start + len].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, rate: u32) -> Waveform {
        Waveform::new((0..n).map(|i| i as f32 / n as f32).collect(), rate).unwrap()
    }

    #[test]
    fn full_slice_is_identity() {
        let w = ramp(16000 * 3 + 7, 16000);
        assert_eq!(w.slice(0.0, w.duration_s()).unwrap(), w);
    }

    #[test]
    fn four_second_slice_length() {
        let w = ramp(16000 * 10, 16000);
        assert_eq!(w.slice(2.5, 6.5).unwrap().len(), 64_000);
        let s = w.slice(1.0, 2.0).unwrap();
        assert_eq!(s.samples()[0], w.samples()[16000]);
    }

    #[test]
    fn slice_beyond_duration() {
        let w = ramp(16000, 16000);
        assert!(matches!(w.slice(0.5, 1.5), Err(AudioError::OutOfRange { .. })));
        assert!(w.slice(-0.1, 0.5).is_err());
        assert!(w.slice(0.5, 0.5).is_err());
    }

    #[test]
    fn slice_ending_at_duration() {
        let w = ramp(16000 * 10, 16000);
        let t = 9.99996; // rounds the start up
        let s = w.slice(t - 4.0, w.duration_s()).unwrap();
        assert_eq!(s.len(), ((w.duration_s() - (t - 4.0)) * 16000.0).round() as usize);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(Waveform::new(vec![0.0, f32::NAN], 8000), Err(AudioError::NonFinite(1))));
        assert!(matches!(Waveform::new(vec![], 0), Err(AudioError::InvalidRate)));
    }
}
