//! WAV container and raw PCM I/O (mono, 16-bit integer or 32-bit float).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    #[default]
    S16,
    F32,
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s16" | "s16le" | "i16" => Ok(SampleFormat::S16),
            "f32" | "f32le" => Ok(SampleFormat::F32),
            other => Err(Error::InvalidInput(format!("unknown sample format {other:?}"))),
        }
    }
}

#[inline]
pub fn s16_to_f32(s: i16) -> f32 {
    s as f32 / 32768.0
}

#[inline]
pub fn f32_to_s16(x: f32) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Decoded mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    pub format: SampleFormat,
    pub samples: Vec<f32>,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let reader = hound::WavReader::open(path.as_ref())?;
    read_wav_from(reader)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<Audio> {
    read_wav_from(hound::WavReader::new(std::io::Cursor::new(bytes))?)
}

fn read_wav_from<R: Read>(reader: hound::WavReader<R>) -> Result<Audio> {
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidInput(format!(
            "expected mono audio, got {} channels",
            spec.channels
        )));
    }
    let (format, samples) = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => (
            SampleFormat::S16,
            reader
                .into_samples::<i16>()
                .map(|s| s.map(s16_to_f32))
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        (hound::SampleFormat::Float, 32) => (
            SampleFormat::F32,
            reader
                .into_samples::<f32>()
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        (f, b) => {
            return Err(Error::InvalidInput(format!(
                "unsupported wav encoding {f:?} with {b} bits"
            )))
        }
    };
    Ok(Audio {
        sample_rate: spec.sample_rate,
        format,
        samples,
    })
}

fn wav_spec(sample_rate: u32, format: SampleFormat) -> hound::WavSpec {
    match format {
        SampleFormat::S16 => hound::WavSpec {
            channels: 1,
            sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        },
        SampleFormat::F32 => hound::WavSpec {
            channels: 1,
            sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        },
    }
}

fn write_samples<W: Write + std::io::Seek>(
    mut w: hound::WavWriter<W>,
    samples: &[f32],
    format: SampleFormat,
) -> Result<()> {
    for &x in samples {
        match format {
            SampleFormat::S16 => w.write_sample(f32_to_s16(x))?,
            SampleFormat::F32 => w.write_sample(x)?,
        }
    }
    w.finalize()?;
    Ok(())
}

pub fn write_wav(
    path: impl AsRef<Path>,
    samples: &[f32],
    sample_rate: u32,
    format: SampleFormat,
) -> Result<()> {
    let w = hound::WavWriter::create(path.as_ref(), wav_spec(sample_rate, format))?;
    write_samples(w, samples, format)
}

/// Encodes a complete WAV file in memory.
pub fn wav_bytes(samples: &[f32], sample_rate: u32, format: SampleFormat) -> Result<Vec<u8>> {
    let mut cursor = std::io::Cursor::new(Vec::new());
    let w = hound::WavWriter::new(&mut cursor, wav_spec(sample_rate, format))?;
    write_samples(w, samples, format)?;
    Ok(cursor.into_inner())
}

/// Reads up to `out.len()` raw little-endian samples; returns how many were
/// read (fewer only at end of stream).
pub fn read_raw<R: Read>(r: &mut R, format: SampleFormat, out: &mut [f32]) -> Result<usize> {
    let width = match format {
        SampleFormat::S16 => 2,
        SampleFormat::F32 => 4,
    };
    let mut bytes = vec![0u8; out.len() * width];
    let mut filled = 0;
    while filled < bytes.len() {
        match r.read(&mut bytes[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    let n = filled / width;
    for (i, o) in out.iter_mut().take(n).enumerate() {
        let b = &bytes[i * width..(i + 1) * width];
        *o = match format {
            SampleFormat::S16 => s16_to_f32(i16::from_le_bytes([b[0], b[1]])),
            SampleFormat::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
        };
    }
    Ok(n)
}

pub fn write_raw<W: Write>(w: &mut W, format: SampleFormat, samples: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(samples.len() * 4);
    for &x in samples {
        match format {
            SampleFormat::S16 => buf.extend_from_slice(&f32_to_s16(x).to_le_bytes()),
            SampleFormat::F32 => buf.extend_from_slice(&x.to_le_bytes()),
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_both_formats() {
        let x: Vec<f32> = (0..500).map(|i| ((i as f32) * 0.01).sin() * 0.7).collect();
        let f = read_wav_bytes(&wav_bytes(&x, 24_000, SampleFormat::F32).unwrap()).unwrap();
        assert_eq!(f.samples, x);
        assert_eq!(f.format, SampleFormat::F32);
        let s = read_wav_bytes(&wav_bytes(&x, 24_000, SampleFormat::S16).unwrap()).unwrap();
        assert_eq!(s.sample_rate, 24_000);
        for (a, b) in s.samples.iter().zip(&x) {
            assert!((a - b).abs() <= 0.5 / 32768.0);
        }
    }

    #[test]
    fn raw_round_trip() {
        let x = [0.0f32, 0.5, -0.25, 1.0, -1.0];
        for fmt in [SampleFormat::S16, SampleFormat::F32] {
            let mut bytes = Vec::new();
            write_raw(&mut bytes, fmt, &x).unwrap();
            let mut out = [9.0f32; 8];
            let n = read_raw(&mut bytes.as_slice(), fmt, &mut out).unwrap();
            assert_eq!(n, 5);
            for (a, b) in out[..n].iter().zip(&x) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }
}
