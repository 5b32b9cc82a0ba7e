//! Mono 16-bit PCM WAV read/write (little-endian RIFF). This is the canonical
//! on-disk audio format for the toolkit.

use std::io::{Read, Write};
use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

/// Quantize one sample to i16. Round-half-away-from-zero so the mapping is
/// stable across platforms.
fn to_i16(x: f32) -> i16 {
    let v = (f64::from(x) * 32767.0).round();
    v.clamp(-32768.0, 32767.0) as i16
}

fn from_i16(v: i16) -> f32 {
    f32::from(v) / 32768.0
}

/// Encode as PCM16 mono WAV bytes.
pub fn encode(w: &Waveform) -> Vec<u8> {
    let data_len = w.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate_hz() * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in w.samples() {
        out.extend_from_slice(&to_i16(*s).to_le_bytes());
    }
    out
}

/// Decode PCM16 mono WAV bytes.
pub fn decode(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12usize;
    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Format("fmt chunk too short".into()));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if format != 1 || bits != 16 {
                    return Err(Error::Format(format!(
                        "unsupported WAV encoding (format {format}, {bits}-bit); need PCM16"
                    )));
                }
                if channels != 1 {
                    return Err(Error::Format(format!(
                        "unsupported channel count {channels}; audio is mono-only"
                    )));
                }
                sample_rate = Some(rate);
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word-aligned
        pos = pos + 8 + size + (size & 1);
    }
    let rate = sample_rate.ok_or_else(|| Error::Format("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("missing data chunk".into()))?;
    let mut samples = Vec::with_capacity(data.len() / 2);
    for pair in data.chunks_exact(2) {
        samples.push(from_i16(i16::from_le_bytes([pair[0], pair[1]])));
    }
    Waveform::new(samples, rate)
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(w))?;
    Ok(())
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::tone::sine;
    use crate::audio::CANONICAL_SAMPLE_RATE;

    #[test]
    fn encode_decode_round_trip_is_stable() {
        let w = sine(220.0, 0.2, CANONICAL_SAMPLE_RATE, 0.5);
        let once = decode(&encode(&w)).unwrap();
        // After one quantization pass the samples are fixed points.
        let twice = decode(&encode(&once)).unwrap();
        assert_eq!(once.samples(), twice.samples());
        assert_eq!(once.sample_rate_hz(), CANONICAL_SAMPLE_RATE);
        for (a, b) in w.samples().iter().zip(once.samples()) {
            assert!((a - b).abs() <= 1.0 / 32766.0);
        }
    }

    #[test]
    fn rejects_non_wav_and_stereo() {
        assert!(decode(b"not a wav at all").is_err());
        // hand-build a stereo header
        let w = sine(220.0, 0.05, CANONICAL_SAMPLE_RATE, 0.3);
        let mut bytes = encode(&w);
        bytes[22] = 2; // channel count
        assert!(decode(&bytes).is_err());
    }
}
