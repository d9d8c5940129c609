//! Phase-vocoder time stretching and pitch shifting.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::resample::resample_by_ratio;
use super::{AudioError, Waveform};

pub const VOCODER_WINDOW: usize = 1024;
pub const VOCODER_HOP: usize = 256;

/// Largest accepted pitch shift, in semitones.
pub const MAX_SEMITONES: f64 = 24.0;

struct Stft {
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    fn new() -> Self {
        let mut planner = FftPlanner::new();
        let window = (0..VOCODER_WINDOW)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / VOCODER_WINDOW as f64).cos())
            .collect();
        Self {
            window,
            forward: planner.plan_fft_forward(VOCODER_WINDOW),
            inverse: planner.plan_fft_inverse(VOCODER_WINDOW),
        }
    }

    /// Centered frames: the signal is zero-padded by half a window on the left.
    fn analyze(&self, samples: &[f32]) -> Vec<Vec<Complex64>> {
        let pad = VOCODER_WINDOW / 2;
        let padded_len = samples.len() + 2 * pad + VOCODER_HOP;
        let n_frames = 1 + (padded_len - VOCODER_WINDOW) / VOCODER_HOP;
        let bins = VOCODER_WINDOW / 2 + 1;
        let mut frames = Vec::with_capacity(n_frames);
        let mut buf = vec![Complex64::new(0.0, 0.0); VOCODER_WINDOW];
        for m in 0..n_frames {
            let start = m * VOCODER_HOP;
            for (i, slot) in buf.iter_mut().enumerate() {
                let idx = (start + i) as isize - pad as isize;
                let s = if idx >= 0 && (idx as usize) < samples.len() {
                    f64::from(samples[idx as usize])
                } else {
                    0.0
                };
                *slot = Complex64::new(s * self.window[i], 0.0);
            }
            self.forward.process(&mut buf);
            frames.push(buf[..bins].to_vec());
        }
        frames
    }

    /// Windowed overlap-add, normalized by the summed squared window, then
    /// trimmed to `out_len` samples after removing the centering pad.
    fn synthesize(&self, frames: &[Vec<Complex64>], out_len: usize) -> Vec<f32> {
        let pad = VOCODER_WINDOW / 2;
        let total = VOCODER_WINDOW + VOCODER_HOP * frames.len().saturating_sub(1);
        let mut out = vec![0.0f64; total.max(pad + out_len)];
        let mut norm = vec![0.0f64; out.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); VOCODER_WINDOW];
        for (m, half) in frames.iter().enumerate() {
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = if k < half.len() {
                    half[k]
                } else {
                    half[VOCODER_WINDOW - k].conj()
                };
            }
            self.inverse.process(&mut buf);
            let start = m * VOCODER_HOP;
            for i in 0..VOCODER_WINDOW {
                let w = self.window[i];
                out[start + i] += buf[i].re / VOCODER_WINDOW as f64 * w;
                norm[start + i] += w * w;
            }
        }
        out[pad..pad + out_len]
            .iter()
            .zip(&norm[pad..pad + out_len])
            .map(|(y, n)| if *n > 1e-8 { (y / n) as f32 } else { 0.0 })
            .collect()
    }
}

fn wrap_phase(x: f64) -> f64 {
    x - 2.0 * PI * (x / (2.0 * PI)).round()
}

fn stretch_samples(samples: &[f32], rate: f64, out_len: usize) -> Vec<f32> {
    if samples.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let stft = Stft::new();
    let frames = stft.analyze(samples);
    let bins = VOCODER_WINDOW / 2 + 1;
    let advance: Vec<f64> = (0..bins)
        .map(|k| 2.0 * PI * k as f64 * VOCODER_HOP as f64 / VOCODER_WINDOW as f64)
        .collect();
    let zero = vec![Complex64::new(0.0, 0.0); bins];

    let mut phase: Vec<f64> = frames[0].iter().map(|c| c.arg()).collect();
    let mut output = Vec::new();
    let mut step = 0.0f64;
    while step < frames.len() as f64 {
        let i = step.floor() as usize;
        let alpha = step - i as f64;
        let c0 = &frames[i];
        let c1 = frames.get(i + 1).unwrap_or(&zero);
        let mut frame = Vec::with_capacity(bins);
        for k in 0..bins {
            let mag = (1.0 - alpha) * c0[k].norm() + alpha * c1[k].norm();
            frame.push(Complex64::from_polar(mag, phase[k]));
            let delta = wrap_phase(c1[k].arg() - c0[k].arg() - advance[k]);
            phase[k] += advance[k] + delta;
        }
        output.push(frame);
        step += rate;
    }
    stft.synthesize(&output, out_len)
}

/// Change duration by `1 / rate` keeping pitch. `rate > 1` shortens.
/// The output holds exactly `round(len / rate)` samples.
pub fn time_stretch(w: &Waveform, rate: f64) -> Result<Waveform, AudioError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(AudioError::InvalidParameter(format!("stretch rate must be positive, got {rate}")));
    }
    if rate == 1.0 {
        return Ok(w.clone());
    }
    let out_len = (w.len() as f64 / rate).round() as usize;
    Ok(Waveform::from_dsp(stretch_samples(w.samples(), rate, out_len), w.sample_rate_hz()))
}

/// Scale every frequency by `2^(semitones / 12)` keeping duration: stretch
/// by `2^(-semitones / 12)`, then resample back to the input length.
pub fn pitch_shift(w: &Waveform, semitones: f64) -> Result<Waveform, AudioError> {
    if !(semitones.is_finite() && semitones.abs() <= MAX_SEMITONES) {
        return Err(AudioError::InvalidParameter(format!(
            "pitch shift must be within ±{MAX_SEMITONES} semitones, got {semitones}"
        )));
    }
    if semitones == 0.0 {
        return Ok(w.clone());
    }
    let factor = 2f64.powf(semitones / 12.0);
    let stretched_len = (w.len() as f64 * factor).round() as usize;
    let stretched = stretch_samples(w.samples(), 1.0 / factor, stretched_len);
    let shifted = resample_by_ratio(&stretched, 1.0 / factor, w.len());
    Ok(Waveform::from_dsp(shifted, w.sample_rate_hz()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, secs: f64) -> Waveform {
        let n = (secs * 16000.0) as usize;
        Waveform::new(
            (0..n)
                .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / 16000.0).sin()) as f32)
                .collect(),
            16000,
        )
        .unwrap()
    }

    fn zero_crossing_hz(w: &Waveform) -> f64 {
        let s = &w.samples()[w.len() / 4..3 * w.len() / 4];
        let crossings = s.windows(2).filter(|p| p[0] <= 0.0 && p[1] > 0.0).count();
        crossings as f64 / (s.len() as f64 / 16000.0)
    }

    #[test]
    fn stretch_length_is_exact() {
        let w = sine(440.0, 1.0);
        assert_eq!(time_stretch(&w, 1.25).unwrap().len(), 12800);
        assert_eq!(time_stretch(&w, 0.8).unwrap().len(), 20000);
    }

    #[test]
    fn unit_rate_is_identity() {
        let w = sine(300.0, 0.3);
        assert_eq!(time_stretch(&w, 1.0).unwrap(), w);
        assert_eq!(pitch_shift(&w, 0.0).unwrap(), w);
    }

    #[test]
    fn stretch_keeps_frequency_by_zero_crossings() {
        let out = time_stretch(&sine(440.0, 1.0), 0.8).unwrap();
        let f = zero_crossing_hz(&out);
        assert!((f - 440.0).abs() < 440.0 * 0.01, "{f}");
    }

    #[test]
    fn shift_octave_by_zero_crossings() {
        let out = pitch_shift(&sine(440.0, 1.0), 12.0).unwrap();
        assert_eq!(out.len(), 16000);
        let f = zero_crossing_hz(&out);
        assert!((f - 880.0).abs() < 880.0 * 0.01, "{f}");
    }

    #[test]
    fn invalid_parameters() {
        let w = sine(440.0, 0.1);
        assert!(time_stretch(&w, 0.0).is_err());
        assert!(time_stretch(&w, f64::NAN).is_err());
        assert!(pitch_shift(&w, 25.0).is_err());
    }

    #[test]
    fn empty_input() {
        let w = Waveform::new(vec![], 16000).unwrap();
        assert!(time_stretch(&w, 1.3).unwrap().is_empty());
        assert!(pitch_shift(&w, 3.0).unwrap().is_empty());
    }
}
