//! Deterministic mono audio: the waveform type, amplitude-exact transforms,
//! pitch-preserving time stretching, pitch and vocal-range manipulation, F0
//! tracking, and terminal-contour labeling.
//!
//! Every operation here is a pure function of its inputs. Identical inputs
//! give bit-identical outputs on any thread count.

mod pitch;
mod stretch;
pub mod tone;
pub mod wav;

pub use pitch::{
    classify_terminal_contour, estimate_f0, ContourConfig, ContourLabel, F0Config, F0Track,
};
pub use stretch::{pitch_shift, range_scale, stretch_hop_seconds, time_stretch};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical sample rate for all benchmark audio.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// Peak level used when a transform has to renormalize to stay in range.
pub const NORMALIZATION_PEAK: f32 = 0.999;

/// Mono PCM audio. Samples stay within [-1.0, 1.0] after every public
/// operation in this module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::invalid("samples must be finite and within [-1.0, 1.0]"));
        }
        Ok(Waveform { samples, sample_rate_hz })
    }

    /// Construct at the canonical 16 kHz rate.
    pub fn canonical(samples: Vec<f32>) -> Result<Self> {
        Waveform::new(samples, CANONICAL_SAMPLE_RATE)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
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

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|s| f64::from(*s) * f64::from(*s)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0_f32, |m, s| m.max(s.abs()))
    }

    /// Resample to a new rate with linear interpolation. Identity when the
    /// rates already match.
    pub fn resampled(&self, target_rate_hz: u32) -> Result<Waveform> {
        if target_rate_hz == 0 {
            return Err(Error::invalid("target sample rate must be positive"));
        }
        if target_rate_hz == self.sample_rate_hz {
            return Ok(self.clone());
        }
        let ratio = f64::from(self.sample_rate_hz) / f64::from(target_rate_hz);
        let out = resample_by_ratio(&self.samples, ratio);
        Waveform::new(out, target_rate_hz)
    }
}

/// Linear-interpolation resample reading the input at step `ratio`
/// (ratio > 1 shortens, < 1 lengthens).
pub(crate) fn resample_by_ratio(input: &[f32], ratio: f64) -> Vec<f32> {
    if input.is_empty() {
        return Vec::new();
    }
    let out_len = (((input.len() - 1) as f64 / ratio).floor() as usize) + 1;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let p = n as f64 * ratio;
        let i = p.floor() as usize;
        let frac = (p - i as f64) as f32;
        let a = input[i.min(input.len() - 1)];
        let b = input[(i + 1).min(input.len() - 1)];
        out.push(a + (b - a) * frac);
    }
    out
}

/// Result of a gain adjustment: the waveform plus whether peak normalization
/// had to fire to keep samples in range.
#[derive(Debug, Clone)]
pub struct GainOutcome {
    pub waveform: Waveform,
    pub normalized: bool,
}

/// Multiply every sample by `10^(gain_db/20)`. If the result would exceed
/// magnitude 1.0 the whole output is scaled so the peak sits at 0.999 and the
/// outcome is flagged; the signal is never hard-clipped.
pub fn apply_gain(w: &Waveform, gain_db: f64) -> Result<GainOutcome> {
    if w.is_empty() {
        return Err(Error::invalid("apply_gain requires a non-empty waveform"));
    }
    let factor = 10f64.powf(gain_db / 20.0) as f32;
    let mut samples: Vec<f32> = w.samples.iter().map(|s| s * factor).collect();
    let peak = samples.iter().fold(0.0_f32, |m, s| m.max(s.abs()));
    let normalized = peak > 1.0;
    if normalized {
        let scale = NORMALIZATION_PEAK / peak;
        for s in &mut samples {
            *s *= scale;
        }
    }
    Ok(GainOutcome {
        waveform: Waveform { samples, sample_rate_hz: w.sample_rate_hz },
        normalized,
    })
}

/// Samples in exact reverse order; sample rate unchanged.
pub fn reverse(w: &Waveform) -> Waveform {
    let mut samples = w.samples.clone();
    samples.reverse();
    Waveform { samples, sample_rate_hz: w.sample_rate_hz }
}

/// Join parts in order with `gap_seconds` of silence between consecutive
/// parts. All parts must share one sample rate.
pub fn concat(parts: &[Waveform], gap_seconds: f64) -> Result<Waveform> {
    if parts.is_empty() {
        return Err(Error::invalid("concat requires at least one part"));
    }
    if gap_seconds < 0.0 || !gap_seconds.is_finite() {
        return Err(Error::invalid("gap must be a non-negative number of seconds"));
    }
    let rate = parts[0].sample_rate_hz;
    if parts.iter().any(|p| p.sample_rate_hz != rate) {
        return Err(Error::invalid("concat requires all parts to share one sample rate"));
    }
    let gap_len = (gap_seconds * f64::from(rate)).round() as usize;
    let total: usize =
        parts.iter().map(Waveform::len).sum::<usize>() + gap_len * (parts.len() - 1);
    let mut samples = Vec::with_capacity(total);
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            samples.extend(std::iter::repeat_n(0.0f32, gap_len));
        }
        samples.extend_from_slice(&p.samples);
    }
    Ok(Waveform { samples, sample_rate_hz: rate })
}

pub(crate) fn from_parts_unchecked(samples: Vec<f32>, sample_rate_hz: u32) -> Waveform {
    debug_assert!(samples.iter().all(|s| s.is_finite() && s.abs() <= 1.0));
    Waveform { samples, sample_rate_hz }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::tone::sine;

    #[test]
    fn gain_zero_db_is_bit_identical() {
        let w = sine(220.0, 0.25, CANONICAL_SAMPLE_RATE, 0.5);
        let out = apply_gain(&w, 0.0).unwrap();
        assert!(!out.normalized);
        assert_eq!(out.waveform.samples(), w.samples());
    }

    #[test]
    fn gain_doubles_constant_signal() {
        // 10^(6.0206/20) = 2.0 to within float precision.
        let w = Waveform::canonical(vec![0.25; 256]).unwrap();
        let out = apply_gain(&w, 6.0206).unwrap();
        assert!(!out.normalized);
        for s in out.waveform.samples() {
            assert!((f64::from(*s) - 0.5).abs() < 1e-6, "sample {s}");
        }
    }

    #[test]
    fn gain_normalizes_instead_of_clipping() {
        let mut samples = vec![0.1; 512];
        samples[100] = 0.9;
        let w = Waveform::canonical(samples).unwrap();
        let out = apply_gain(&w, 6.0206).unwrap();
        assert!(out.normalized);
        let peak = out.waveform.peak();
        assert!((peak - NORMALIZATION_PEAK).abs() < 1e-6, "peak {peak}");
    }

    #[test]
    fn gain_on_empty_waveform_is_invalid() {
        let w = Waveform::canonical(vec![]).unwrap();
        assert!(matches!(apply_gain(&w, 3.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gain_composes_additively_in_db() {
        let w = sine(180.0, 0.3, CANONICAL_SAMPLE_RATE, 0.2);
        let twice = apply_gain(&apply_gain(&w, 2.5).unwrap().waveform, 3.5).unwrap();
        let once = apply_gain(&w, 6.0).unwrap();
        assert!(!twice.normalized && !once.normalized);
        for (a, b) in twice.waveform.samples().iter().zip(once.waveform.samples()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn reverse_is_an_involution_and_preserves_rms() {
        let w = Waveform::canonical(vec![0.1, -0.2, 0.3]).unwrap();
        let r = reverse(&w);
        assert_eq!(r.samples(), &[0.3, -0.2, 0.1]);
        assert_eq!(reverse(&r).samples(), w.samples());
        assert_eq!(r.rms(), w.rms());
    }

    #[test]
    fn concat_counts_gap_samples() {
        let one = Waveform::canonical(vec![0.1; 16_000]).unwrap();
        let two = Waveform::canonical(vec![0.2; 32_000]).unwrap();
        let out = concat(&[one, two], 0.5).unwrap();
        assert_eq!(out.len(), 16_000 + 8_000 + 32_000);
    }

    #[test]
    fn concat_singleton_is_identity() {
        let w = sine(330.0, 0.2, CANONICAL_SAMPLE_RATE, 0.4);
        let out = concat(std::slice::from_ref(&w), 1.25).unwrap();
        assert_eq!(out.samples(), w.samples());
    }

    #[test]
    fn concat_rejects_rate_mismatch_and_empty_list() {
        let a = Waveform::new(vec![0.1; 100], 16_000).unwrap();
        let b = Waveform::new(vec![0.1; 100], 8_000).unwrap();
        assert!(matches!(concat(&[a, b], 0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(concat(&[], 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn resample_halves_length_at_double_ratio() {
        let w = sine(220.0, 1.0, 32_000, 0.5);
        let down = w.resampled(16_000).unwrap();
        assert!((down.duration_seconds() - 1.0).abs() < 0.001);
        assert_eq!(down.sample_rate_hz(), 16_000);
    }
}
