//! Deterministic test-signal generators: tones, chirps, vibrato carriers,
//! and seeded noise. These double as oracles in tests and as the voice
//! substrate for the offline stub synthesizer.

use rand::Rng;

use super::{from_parts_unchecked, Waveform};
use crate::seeded::rng_for;

use std::f64::consts::TAU;

fn sample_count(duration_s: f64, rate: u32) -> usize {
    (duration_s * f64::from(rate)).round() as usize
}

/// Pure sine at a fixed frequency.
pub fn sine(freq_hz: f64, duration_s: f64, rate: u32, amplitude: f32) -> Waveform {
    let n = sample_count(duration_s, rate);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / f64::from(rate);
        samples.push(amplitude * (TAU * freq_hz * t).sin() as f32);
    }
    from_parts_unchecked(samples, rate)
}

/// Linear chirp from `f0_hz` to `f1_hz` over the duration. The phase is the
/// exact integral of the instantaneous frequency.
pub fn linear_chirp(f0_hz: f64, f1_hz: f64, duration_s: f64, rate: u32, amplitude: f32) -> Waveform {
    let n = sample_count(duration_s, rate);
    let mut samples = Vec::with_capacity(n);
    let total = duration_s;
    for i in 0..n {
        let t = i as f64 / f64::from(rate);
        let phase = TAU * (f0_hz * t + (f1_hz - f0_hz) * t * t / (2.0 * total));
        samples.push(amplitude * phase.sin() as f32);
    }
    from_parts_unchecked(samples, rate)
}

/// Carrier with sinusoidal pitch vibrato of `deviation_semitones` at
/// `vibrato_hz`. Instantaneous frequency is
/// `carrier * 2^(deviation * sin(2*pi*vibrato_hz*t) / 12)`; the phase is
/// accumulated numerically so the contour is exact at sample resolution.
pub fn vibrato_tone(
    carrier_hz: f64,
    deviation_semitones: f64,
    vibrato_hz: f64,
    duration_s: f64,
    rate: u32,
    amplitude: f32,
) -> Waveform {
    let n = sample_count(duration_s, rate);
    let mut samples = Vec::with_capacity(n);
    let dt = 1.0 / f64::from(rate);
    let mut phase = 0.0_f64;
    for i in 0..n {
        let t = i as f64 * dt;
        let dev = deviation_semitones * (TAU * vibrato_hz * t).sin();
        let freq = carrier_hz * (dev / 12.0).exp2();
        samples.push(amplitude * (TAU * phase).sin() as f32);
        phase += freq * dt;
    }
    from_parts_unchecked(samples, rate)
}

/// Seeded uniform white noise in [-amplitude, amplitude].
pub fn noise(seed: u64, duration_s: f64, rate: u32, amplitude: f32) -> Waveform {
    let n = sample_count(duration_s, rate);
    let mut rng = rng_for(seed, &["tone", "noise"]);
    let samples = (0..n).map(|_| rng.gen_range(-amplitude..=amplitude)).collect();
    from_parts_unchecked(samples, rate)
}

/// Silence of the given duration.
pub fn silence(duration_s: f64, rate: u32) -> Waveform {
    from_parts_unchecked(vec![0.0; sample_count(duration_s, rate)], rate)
}

/// A small harmonic complex: fundamental plus a few decaying overtones, with
/// the fundamental following a supplied per-sample frequency curve. Used by
/// the stub voices so different speakers are spectrally distinct.
pub fn harmonic_voice(
    freq_curve: impl Fn(f64) -> f64,
    duration_s: f64,
    rate: u32,
    amplitude: f32,
    overtone_weights: &[f32],
) -> Waveform {
    let n = sample_count(duration_s, rate);
    let dt = 1.0 / f64::from(rate);
    let mut phase = 0.0_f64;
    let mut samples = Vec::with_capacity(n);
    let norm: f32 = 1.0 + overtone_weights.iter().sum::<f32>();
    for i in 0..n {
        let t = i as f64 * dt;
        let f = freq_curve(t);
        let mut v = (TAU * phase).sin() as f32;
        for (k, w) in overtone_weights.iter().enumerate() {
            v += w * (TAU * phase * (k + 2) as f64).sin() as f32;
        }
        // short fade at both ends to avoid clicks in concatenation
        let fade = 0.01;
        let env = (t / fade).min(1.0).min(((duration_s - t) / fade).max(0.0)) as f32;
        samples.push(amplitude * env * v / norm);
        phase += f * dt;
    }
    from_parts_unchecked(samples, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::CANONICAL_SAMPLE_RATE;

    #[test]
    fn generators_are_deterministic() {
        let a = noise(7, 0.1, CANONICAL_SAMPLE_RATE, 0.3);
        let b = noise(7, 0.1, CANONICAL_SAMPLE_RATE, 0.3);
        assert_eq!(a.samples(), b.samples());
        let c = noise(8, 0.1, CANONICAL_SAMPLE_RATE, 0.3);
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn sine_has_expected_length_and_range() {
        let w = sine(220.0, 1.0, CANONICAL_SAMPLE_RATE, 0.5);
        assert_eq!(w.len(), 16_000);
        assert!(w.peak() <= 0.5 + 1e-6);
    }
}
