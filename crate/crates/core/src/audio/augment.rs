use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::vocoder::{pitch_shift, time_stretch};
use super::{AudioError, Waveform};
use crate::rng::HdmRng;

/// Parameter ranges and firing probability of the augmentation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub noise_amp: (f64, f64),
    pub stretch_rate: (f64, f64),
    pub pitch_semitones: (f64, f64),
    pub apply_prob: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            noise_amp: (0.001, 0.015),
            stretch_rate: (0.8, 1.25),
            pitch_semitones: (-4.0, 4.0),
            apply_prob: 0.5,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let ordered = |name: &str, (lo, hi): (f64, f64)| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(AudioError::InvalidParameter(format!("{name} range [{lo}, {hi}] is not ordered")))
            }
        };
        ordered("noise_amp", self.noise_amp)?;
        ordered("stretch_rate", self.stretch_rate)?;
        ordered("pitch_semitones", self.pitch_semitones)?;
        if self.noise_amp.0 < 0.0 {
            return Err(AudioError::InvalidParameter("noise amplitude must be non-negative".into()));
        }
        if self.stretch_rate.0 <= 0.0 {
            return Err(AudioError::InvalidParameter("stretch rate must be positive".into()));
        }
        if self.pitch_semitones.0 < -24.0 || self.pitch_semitones.1 > 24.0 {
            return Err(AudioError::InvalidParameter("pitch range exceeds ±24 semitones".into()));
        }
        if !(0.0..=1.0).contains(&self.apply_prob) {
            return Err(AudioError::InvalidParameter(format!(
                "apply_prob {} outside [0, 1]",
                self.apply_prob
            )));
        }
        Ok(())
    }
}

/// Which transforms ran, with their parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentTrace {
    pub noise_amp: Option<f64>,
    pub stretch_rate: Option<f64>,
    pub pitch_semitones: Option<f64>,
}

/// Transforms forced on with a fixed parameter regardless of the coin.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentOverrides {
    pub noise_amp: Option<f64>,
    pub stretch_rate: Option<f64>,
    pub pitch_semitones: Option<f64>,
}

/// Gaussian noise with standard deviation `amp`, clamped to [-1, 1].
pub fn add_noise<R: Rng + ?Sized>(w: &Waveform, amp: f64, rng: &mut R) -> Result<Waveform, AudioError> {
    if !(amp >= 0.0 && amp.is_finite()) {
        return Err(AudioError::InvalidParameter(format!("noise amplitude must be >= 0, got {amp}")));
    }
    if amp == 0.0 {
        return Ok(w.clone());
    }
    let normal = Normal::new(0.0, amp).expect("finite positive std dev");
    let samples = w
        .samples()
        .iter()
        .map(|&s| (f64::from(s) + normal.sample(rng)).clamp(-1.0, 1.0) as f32)
        .collect();
    Ok(Waveform::from_dsp(samples, w.sample_rate_hz()))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn augment<R: Rng + ?Sized>(w: &Waveform, config: &AugmentConfig, rng: &mut R) -> Result<Waveform, AudioError> {
    augment_with(w, config, &AugmentOverrides::default(), rng).map(|(out, _)| out)
}

/// Noise, stretch, then pitch shift, each on an independent coin.
///
/// The rng is consumed identically on every call (three coins, three
/// parameters, one noise seed) so the trace never depends on the input.
pub fn augment_with<R: Rng + ?Sized>(
    w: &Waveform,
    config: &AugmentConfig,
    overrides: &AugmentOverrides,
    rng: &mut R,
) -> Result<(Waveform, AugmentTrace), AudioError> {
    config.validate()?;
    let mut draw = |range| {
        let fire = rng.random_bool(config.apply_prob);
        let value = uniform(rng, range);
        fire.then_some(value)
    };
    let noise = draw(config.noise_amp);
    let stretch = draw(config.stretch_rate);
    let pitch = draw(config.pitch_semitones);
    let noise_seed: u64 = rng.random();

    let trace = AugmentTrace {
        noise_amp: overrides.noise_amp.or(noise),
        stretch_rate: overrides.stretch_rate.or(stretch),
        pitch_semitones: overrides.pitch_semitones.or(pitch),
    };

    let mut out = w.clone();
    if let Some(amp) = trace.noise_amp {
        out = add_noise(&out, amp, &mut HdmRng::seed_from_u64(noise_seed))?;
    }
    if let Some(rate) = trace.stretch_rate {
        out = time_stretch(&out, rate)?;
    }
    if let Some(s) = trace.pitch_semitones {
        out = pitch_shift(&out, s)?;
    }
    Ok((out.clamped(), trace))
}
