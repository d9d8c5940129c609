use std::f64::consts::PI;

use super::Waveform;

/// Zero-crossing span of the interpolation kernel, measured at the lower of
/// the two rates.
pub const SINC_TAPS: usize = 64;

/// Band-limited windowed-sinc resampling to `target_hz`.
pub fn resample(w: &Waveform, target_hz: u32) -> Waveform {
    assert!(target_hz > 0, "target rate must be positive");
    if target_hz == w.sample_rate_hz() {
        return w.clone();
    }
    let ratio = f64::from(target_hz) / f64::from(w.sample_rate_hz());
    let out_len = (w.len() as f64 * ratio).round() as usize;
    Waveform::from_dsp(resample_by_ratio(w.samples(), ratio, out_len), target_hz)
}

/// Resample `samples` so output sample `j` sits at input position
/// `j / ratio`, producing exactly `out_len` samples. When `ratio < 1` the
/// kernel cutoff drops to the output Nyquist frequency.
///
/// The kernel is `cutoff * sinc(cutoff * d) * blackman(d / half_width)` for
/// distance `d`. Both trigonometric arguments are linear in the tap index,
/// so they are advanced by rotation instead of being re-evaluated.
pub fn resample_by_ratio(samples: &[f32], ratio: f64, out_len: usize) -> Vec<f32> {
    assert!(ratio > 0.0 && ratio.is_finite(), "ratio must be positive");
    let n = samples.len() as isize;
    let cutoff = ratio.min(1.0);
    let half_width = (SINC_TAPS / 2) as f64 / cutoff;
    let (sinc_ds, sinc_dc) = (PI * cutoff).sin_cos();
    let (win_ds, win_dc) = (PI / half_width).sin_cos();
    (0..out_len)
        .map(|j| {
            let x = j as f64 / ratio;
            let lo = ((x - half_width).ceil() as isize).max(0);
            let hi = ((x + half_width).floor() as isize).min(n - 1);
            if lo > hi {
                return 0.0;
            }
            let d0 = x - lo as f64;
            // sin(pi * cutoff * d) and the window phase pi * (d / half_width + 1)
            // both decrease by a fixed step per tap.
            let (mut ss, mut sc) = (PI * cutoff * d0).sin_cos();
            let (mut ws, mut wc) = (PI * (d0 / half_width + 1.0)).sin_cos();
            let mut acc = 0.0f64;
            for i in lo..=hi {
                let d = x - i as f64;
                let a = PI * cutoff * d;
                let sinc = if a.abs() < 1e-12 { 1.0 } else { ss / a };
                let window = if (d / half_width).abs() >= 1.0 {
                    0.0
                } else {
                    0.42 - 0.5 * wc + 0.08 * (2.0 * wc * wc - 1.0)
                };
                acc += f64::from(samples[i as usize]) * cutoff * sinc * window;
                (ss, sc) = (ss * sinc_dc - sc * sinc_ds, sc * sinc_dc + ss * sinc_ds);
                (ws, wc) = (ws * win_dc - wc * win_ds, wc * win_dc + ws * win_ds);
            }
            acc as f32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, secs: f64) -> Waveform {
        let n = (secs * f64::from(rate)) as usize;
        Waveform::new(
            (0..n)
                .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin()) as f32)
                .collect(),
            rate,
        )
        .unwrap()
    }

    /// Direct DFT magnitude scan over a frequency grid, independent of any FFT.
    fn dft_peak_hz(w: &Waveform, lo: f64, hi: f64, step: f64) -> f64 {
        let rate = f64::from(w.sample_rate_hz());
        let mut best = (lo, 0.0);
        let mut f = lo;
        while f <= hi {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, s) in w.samples().iter().enumerate() {
                let ph = 2.0 * PI * f * i as f64 / rate;
                re += f64::from(*s) * ph.cos();
                im -= f64::from(*s) * ph.sin();
            }
            let mag = re * re + im * im;
            if mag > best.1 {
                best = (f, mag);
            }
            f += step;
        }
        best.0
    }

    fn direct(samples: &[f32], ratio: f64, out_len: usize) -> Vec<f32> {
        let sinc = |x: f64| if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let blackman = |u: f64| {
            if u.abs() >= 1.0 {
                return 0.0;
            }
            let x = (u + 1.0) / 2.0;
            0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()
        };
        let cutoff = ratio.min(1.0);
        let hw = (SINC_TAPS / 2) as f64 / cutoff;
        (0..out_len)
            .map(|j| {
                let x = j as f64 / ratio;
                let mut acc = 0.0;
                for (i, s) in samples.iter().enumerate() {
                    let d = x - i as f64;
                    acc += f64::from(*s) * cutoff * sinc(cutoff * d) * blackman(d / hw);
                }
                acc as f32
            })
            .collect()
    }

    #[test]
    fn matches_direct_kernel_evaluation() {
        let w = sine(700.0, 16000, 0.05);
        for ratio in [0.36281, 0.5, 1.0, 1.25, 2.75625] {
            let out_len = (w.len() as f64 * ratio) as usize;
            let fast = resample_by_ratio(w.samples(), ratio, out_len);
            let slow = direct(w.samples(), ratio, out_len);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-6, "ratio {ratio}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn doubling_rate_doubles_length() {
        let w = sine(1000.0, 8000, 1.0);
        let up = resample(&w, 16000);
        assert!((up.len() as i64 - 16000).abs() <= 1);
        assert!((up.duration_s() - w.duration_s()).abs() <= 1.0 / 16000.0);
    }

    #[test]
    fn same_rate_is_identity() {
        let w = sine(440.0, 16000, 0.2);
        assert_eq!(resample(&w, 16000), w);
    }

    #[test]
    fn tone_frequency_preserved() {
        let w = sine(1000.0, 8000, 0.5);
        let up = resample(&w, 16000);
        // One FFT bin of the 0.5 s output is 2 Hz.
        let peak = dft_peak_hz(&up, 900.0, 1100.0, 1.0);
        assert!((peak - 1000.0).abs() <= 2.0, "{peak}");
    }

    #[test]
    fn downsampling_suppresses_alias() {
        // 6 kHz tone is above the 4 kHz Nyquist of the target rate.
        let w = sine(6000.0, 16000, 0.25);
        let down = resample(&w, 8000);
        let interior = &down.samples()[200..down.len() - 200];
        let rms = (interior.iter().map(|s| f64::from(*s).powi(2)).sum::<f64>() / interior.len() as f64).sqrt();
        assert!(rms < 0.01, "alias rms {rms}");
    }

    #[test]
    fn passband_amplitude_kept() {
        let w = sine(440.0, 16000, 0.5);
        let down = resample(&w, 8000);
        let interior = &down.samples()[500..down.len() - 500];
        let peak = interior.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        assert!((peak - 0.5).abs() < 0.01, "{peak}");
    }
}
