use std::io::Cursor;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{resample, AudioError, Waveform};

const PCM16_SCALE: f32 = 32768.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) => AudioError::Truncated(e.to_string()),
        hound::Error::Unsupported => AudioError::UnsupportedCodec("unsupported WAV feature".into()),
        hound::Error::FormatError(msg) => AudioError::Truncated(msg.to_string()),
        other => AudioError::UnsupportedCodec(other.to_string()),
    }
}

/// Decode RIFF/WAVE PCM16 or float32 audio. Multichannel input is averaged
/// to mono per frame.
pub fn read_wav(bytes: &[u8]) -> Result<Waveform, AudioError> {
    let mut reader = WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f32::from(v) / PCM16_SCALE))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedCodec(format!("{fmt:?} with {bits} bits per sample")))
        }
    };
    if interleaved.len() % channels != 0 {
        return Err(AudioError::Truncated("partial frame at end of data".into()));
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };
    Waveform::new(mono, spec.sample_rate)
}

/// Encode mono audio. PCM16 clamps to [-1, 1) before quantizing.
pub fn write_wav(w: &Waveform, encoding: WavEncoding) -> Vec<u8> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate_hz(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut cursor = Cursor::new(Vec::with_capacity(w.len() * 4 + 64));
    {
        let mut writer = WavWriter::new(&mut cursor, spec).expect("in-memory WAV header");
        match encoding {
            WavEncoding::Pcm16 => {
                let mut i16_writer = writer.get_i16_writer(w.len() as u32);
                for &s in w.samples() {
                    let code = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
                    i16_writer.write_sample(code);
                }
                i16_writer.flush().expect("in-memory WAV write");
            }
            WavEncoding::Float32 => {
                for &s in w.samples() {
                    writer.write_sample(s).expect("in-memory WAV write");
                }
            }
        }
        writer.finalize().expect("in-memory WAV finalize");
    }
    cursor.into_inner()
}

/// Canonical wire encoding of a detector window: PCM16 mono at 16 kHz.
/// Registries fingerprint exactly these bytes.
pub fn encode_window_wav(w: &Waveform) -> Vec<u8> {
    if w.sample_rate_hz() == crate::CANONICAL_RATE_HZ {
        write_wav(w, WavEncoding::Pcm16)
    } else {
        write_wav(&resample(w, crate::CANONICAL_RATE_HZ), WavEncoding::Pcm16)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stereo_pcm16(frames: &[(i16, i16)], rate: u32) -> Vec<u8> {
        let spec = WavSpec {
            channels: 2,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut cursor = Cursor::new(Vec::new());
        let mut writer = WavWriter::new(&mut cursor, spec).unwrap();
        for (l, r) in frames {
            writer.write_sample(*l).unwrap();
            writer.write_sample(*r).unwrap();
        }
        writer.finalize().unwrap();
        cursor.into_inner()
    }

    #[test]
    fn float32_round_trip_is_lossless() {
        let w = Waveform::new(vec![0.0, 0.123_456_79, -0.999, 1.0, -1.0, 1e-7], 22050).unwrap();
        let back = read_wav(&write_wav(&w, WavEncoding::Float32)).unwrap();
        assert_eq!(back, w);
        let again = read_wav(&write_wav(&back, WavEncoding::Float32)).unwrap();
        assert_eq!(again, w);
    }

    #[test]
    fn stereo_is_averaged() {
        let bytes = stereo_pcm16(&[(16384, 0), (-32768, 32767), (100, 300)], 8000);
        let w = read_wav(&bytes).unwrap();
        assert_eq!(w.sample_rate_hz(), 8000);
        assert_eq!(w.samples(), &[0.25, -0.5 / 32768.0, 200.0 / 32768.0]);
    }

    #[test]
    fn pcm16_round_trip_all_codes() {
        // Every 16-bit code, decoded, re-encoded and decoded again.
        let codes: Vec<i16> = (i16::MIN..=i16::MAX).collect();
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut cursor = Cursor::new(Vec::new());
        let mut writer = WavWriter::new(&mut cursor, spec).unwrap();
        for c in &codes {
            writer.write_sample(*c).unwrap();
        }
        writer.finalize().unwrap();
        let first = read_wav(&cursor.into_inner()).unwrap();
        let second = read_wav(&write_wav(&first, WavEncoding::Pcm16)).unwrap();
        let max_err = first
            .samples()
            .iter()
            .zip(second.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_err <= 1.0 / 32767.0, "{max_err}");
        for (c, s) in codes.iter().zip(first.samples()) {
            assert_eq!((*s * 32768.0) as i32, i32::from(*c));
        }
    }

    #[test]
    fn pcm16_quantization_error_within_one_lsb() {
        let samples: Vec<f32> = (0..10_000).map(|i| ((i as f32) * 0.731).sin() * 0.999).collect();
        let w = Waveform::new(samples, 16000).unwrap();
        let back = read_wav(&write_wav(&w, WavEncoding::Pcm16)).unwrap();
        for (a, b) in w.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32767.0);
        }
    }

    #[test]
    fn truncated_file() {
        let w = Waveform::new(vec![0.5; 1000], 16000).unwrap();
        let bytes = write_wav(&w, WavEncoding::Pcm16);
        assert!(matches!(read_wav(&bytes[..bytes.len() - 501]), Err(AudioError::Truncated(_))));
        assert!(read_wav(&bytes[..20]).is_err());
    }

    #[test]
    fn non_pcm_codec_rejected() {
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut cursor = Cursor::new(Vec::new());
        let mut writer = WavWriter::new(&mut cursor, spec).unwrap();
        writer.write_sample(5i32).unwrap();
        writer.finalize().unwrap();
        assert!(matches!(read_wav(&cursor.into_inner()), Err(AudioError::UnsupportedCodec(_))));
    }

    #[test]
    fn window_encoding_is_16k_pcm16() {
        let w = Waveform::new(vec![0.1; 8000], 8000).unwrap();
        let back = read_wav(&encode_window_wav(&w)).unwrap();
        assert_eq!(back.sample_rate_hz(), 16000);
        assert_eq!(back.len(), 16000);
    }
}
