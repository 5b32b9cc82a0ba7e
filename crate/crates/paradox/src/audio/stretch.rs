//! Pitch-preserving time stretching (waveform-similarity overlap-add),
//! semitone pitch shifting, and vocal-range scaling.

use super::pitch::{estimate_f0, F0Config};
use super::{from_parts_unchecked, resample_by_ratio, Waveform};
use crate::error::{Error, Result};

/// Analysis window for overlap-add, in samples at 16 kHz (32 ms).
const OLA_WINDOW: usize = 512;
/// Synthesis hop: half the window, giving constant-overlap-add with Hann.
const OLA_HOP: usize = OLA_WINDOW / 2;
/// Half-width of the similarity search around the nominal analysis position.
const OLA_SEARCH: usize = 160;

/// One synthesis hop expressed in seconds; duration postconditions hold
/// within this much.
pub fn stretch_hop_seconds(rate: u32) -> f64 {
    OLA_HOP as f64 / f64::from(rate)
}

fn hann(n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| {
            let x = std::f64::consts::TAU * i as f64 / n as f64;
            (0.5 * (1.0 - x.cos())) as f32
        })
        .collect()
}

/// Change speed by `rate` (output duration = input duration / rate) without
/// changing pitch. Segments of the input are re-laid at the new tempo with a
/// cross-correlation search aligning each copied window to the natural
/// continuation of the previous one.
pub fn time_stretch(w: &Waveform, rate: f64) -> Result<Waveform> {
    if !(0.25..=4.0).contains(&rate) {
        return Err(Error::invalid(format!("time_stretch rate {rate} outside [0.25, 4.0]")));
    }
    if w.is_empty() {
        return Err(Error::invalid("time_stretch requires a non-empty waveform"));
    }
    let input = w.samples();
    let out_len = ((input.len() as f64) / rate).round().max(1.0) as usize;

    if input.len() < 2 * OLA_WINDOW {
        // Too short for overlap-add; fall back to raw position mapping.
        let out = resample_by_ratio(input, input.len() as f64 / out_len as f64);
        return Ok(from_parts_unchecked(out, w.sample_rate_hz()));
    }

    let window = hann(OLA_WINDOW);
    let mut acc = vec![0.0f32; out_len + OLA_WINDOW];
    let mut wsum = vec![0.0f32; out_len + OLA_WINDOW];

    let n_frames = out_len / OLA_HOP + 1;
    let mut prev_start = 0usize;
    for k in 0..n_frames {
        let out_pos = k * OLA_HOP;
        let nominal = (out_pos as f64 * rate).round() as usize;
        let start = if k == 0 {
            0
        } else {
            // natural continuation of the previously copied segment
            let target = prev_start + OLA_HOP;
            best_alignment(input, nominal, target)
        };
        let start = start.min(input.len().saturating_sub(OLA_WINDOW));
        for i in 0..OLA_WINDOW {
            acc[out_pos + i] += input[start + i] * window[i];
            wsum[out_pos + i] += window[i];
        }
        prev_start = start;
    }

    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        out.push(if wsum[i] > 1e-6 { acc[i] / wsum[i] } else { 0.0 });
    }
    Ok(from_parts_unchecked(out, w.sample_rate_hz()))
}

/// Find the input offset near `nominal` whose window best matches the window
/// at `target`, by normalized cross-correlation. Ties break toward the
/// earliest candidate so results are deterministic.
fn best_alignment(input: &[f32], nominal: usize, target: usize) -> usize {
    let corr_len = OLA_HOP;
    let max_start = input.len().saturating_sub(OLA_WINDOW);
    let target = target.min(max_start);
    let lo = nominal.saturating_sub(OLA_SEARCH);
    let hi = (nominal + OLA_SEARCH).min(max_start);
    if lo >= hi {
        return nominal.min(max_start);
    }
    let reference = &input[target..target + corr_len];
    let ref_energy: f64 =
        reference.iter().map(|s| f64::from(*s) * f64::from(*s)).sum::<f64>().sqrt();
    let mut best = lo;
    let mut best_score = f64::NEG_INFINITY;
    for cand in lo..=hi {
        let seg = &input[cand..cand + corr_len];
        let mut dot = 0.0f64;
        let mut energy = 0.0f64;
        for i in 0..corr_len {
            dot += f64::from(seg[i]) * f64::from(reference[i]);
            energy += f64::from(seg[i]) * f64::from(seg[i]);
        }
        let denom = (energy.sqrt() * ref_energy).max(1e-12);
        let score = dot / denom;
        if score > best_score {
            best_score = score;
            best = cand;
        }
    }
    best
}

/// Shift pitch by `semitones` while preserving duration: resample to move the
/// spectrum, then time-stretch back to the original length.
pub fn pitch_shift(w: &Waveform, semitones: f64) -> Result<Waveform> {
    if !(-24.0..=24.0).contains(&semitones) {
        return Err(Error::invalid(format!("pitch_shift {semitones} st outside [-24, 24]")));
    }
    if w.is_empty() {
        return Err(Error::invalid("pitch_shift requires a non-empty waveform"));
    }
    if semitones == 0.0 {
        return Ok(w.clone());
    }
    let factor = (semitones / 12.0).exp2();
    // Reading faster by `factor` multiplies frequencies by `factor` and
    // divides duration by it.
    let shifted = resample_by_ratio(w.samples(), factor);
    let shifted = from_parts_unchecked(shifted, w.sample_rate_hz());
    let restored = time_stretch(&shifted, 1.0 / factor)?;
    // Trim or pad to the exact source length so duration is preserved.
    let mut samples = restored.samples().to_vec();
    samples.resize(w.len(), 0.0);
    Ok(from_parts_unchecked(samples, w.sample_rate_hz()))
}

/// Scale the pitch-contour deviation around the median F0 by `factor` via a
/// time-varying pitch warp; factor > 1 widens the vocal range. The median F0
/// itself is preserved.
pub fn range_scale(w: &Waveform, factor: f64) -> Result<Waveform> {
    if !(0.25..=4.0).contains(&factor) {
        return Err(Error::invalid(format!("range_scale factor {factor} outside [0.25, 4.0]")));
    }
    let cfg = F0Config::default();
    let track = estimate_f0(w, &cfg)?;
    let median = track
        .median_f0()
        .ok_or_else(|| Error::invalid("range_scale requires voiced input (no contour to scale)"))?;

    // Per-frame warp ratio: multiply the local deviation (in semitones) by
    // (factor - 1) on top of the existing contour.
    let hop_samples = (track.frame_hop_seconds * f64::from(w.sample_rate_hz())).round() as usize;
    let mut shift_st: Vec<f64> = track
        .f0_hz
        .iter()
        .map(|f| match f {
            Some(hz) => (factor - 1.0) * 12.0 * (hz / median).log2(),
            None => 0.0,
        })
        .collect();
    smooth3(&mut shift_st);

    let input = w.samples();
    let mut out = Vec::with_capacity(input.len());
    let mut pos = 0.0f64;
    let last = (input.len() - 1) as f64;
    while pos <= last {
        let i = pos.floor() as usize;
        let frac = (pos - i as f64) as f32;
        let a = input[i];
        let b = input[(i + 1).min(input.len() - 1)];
        out.push(a + (b - a) * frac);
        let frame = ((pos as usize) / hop_samples.max(1)).min(shift_st.len().saturating_sub(1));
        let ratio = (shift_st.get(frame).copied().unwrap_or(0.0) / 12.0).exp2();
        pos += ratio;
    }
    Ok(from_parts_unchecked(out, w.sample_rate_hz()))
}

fn smooth3(values: &mut [f64]) {
    if values.len() < 3 {
        return;
    }
    let src = values.to_vec();
    for i in 1..src.len() - 1 {
        values[i] = (src[i - 1] + src[i] + src[i + 1]) / 3.0;
    }
}
