//! Multichannel WAV reading and writing (16-bit PCM and 32-bit float).

use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error(transparent)]
    Hound(#[from] hound::Error),
    #[error("cannot write an empty or ragged multichannel signal")]
    BadSignal,
    #[error("unsupported WAV format: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Write channel-major samples interleaved into a WAV file. PCM samples are
/// clipped to [-1, 1).
pub fn write_wav(
    path: impl AsRef<Path>,
    signal: &[Vec<f64>],
    sample_rate: u32,
    format: WavFormat,
) -> Result<(), WavError> {
    let channels = signal.len();
    let len = signal.first().map_or(0, Vec::len);
    if channels == 0 || channels > u16::MAX as usize || signal.iter().any(|c| c.len() != len) {
        return Err(WavError::BadSignal);
    }
    let spec = WavSpec {
        channels: channels as u16,
        sample_rate,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..len {
        for chan in signal {
            match format {
                WavFormat::Pcm16 => {
                    let v = (chan[i].clamp(-1.0, 1.0) * 32768.0)
                        .round()
                        .clamp(-32768.0, 32767.0);
                    writer.write_sample(v as i16)?;
                }
                WavFormat::Float32 => writer.write_sample(chan[i] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Read a WAV file into channel-major samples scaled to [-1, 1].
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<Vec<f64>>, u32), WavError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let mut out = vec![Vec::new(); channels];
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => {
            for (i, s) in reader.samples::<f32>().enumerate() {
                out[i % channels].push(s? as f64);
            }
        }
        (SampleFormat::Int, 16) => {
            for (i, s) in reader.samples::<i16>().enumerate() {
                out[i % channels].push(s? as f64 / 32768.0);
            }
        }
        (fmt, bits) => return Err(WavError::Unsupported(format!("{fmt:?} {bits} bit"))),
    }
    Ok((out, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let sig = vec![vec![0.5, -0.25, 0.125], vec![0.0, 1.0, -1.0]];
        write_wav(&path, &sig, 16_000, WavFormat::Float32).unwrap();
        let (back, sr) = read_wav(&path).unwrap();
        assert_eq!(sr, 16_000);
        assert_eq!(back, sig);
    }

    #[test]
    fn pcm16_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let sig = vec![vec![0.5, -0.5, 2.0]];
        write_wav(&path, &sig, 16_000, WavFormat::Pcm16).unwrap();
        let (back, _) = read_wav(&path).unwrap();
        assert_eq!(back[0][0], 0.5);
        assert_eq!(back[0][1], -0.5);
        assert!((back[0][2] - 32767.0 / 32768.0).abs() < 1e-12);
    }

    #[test]
    fn ragged_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_wav(
            dir.path().join("x.wav"),
            &[vec![0.0], vec![]],
            16_000,
            WavFormat::Float32,
        );
        assert!(matches!(err, Err(WavError::BadSignal)));
    }
}
