//! The deterministic signal transforms behind the comparison tasks, measured
//! on synthetic tones: gain, pitch-preserving time stretch, duration-
//! preserving pitch shift, and vocal-range scaling.
//!
//!     cargo run --example audio_transforms

use paradox::audio::{
    apply_gain, estimate_f0, pitch_shift, range_scale, time_stretch, tone, F0Config, Waveform,
    CANONICAL_SAMPLE_RATE,
};

fn f0_of(w: &Waveform) -> f64 {
    estimate_f0(w, &F0Config::default()).unwrap().median_f0().unwrap_or(f64::NAN)
}

fn main() -> paradox::Result<()> {
    let tone220 = tone::sine(220.0, 1.5, CANONICAL_SAMPLE_RATE, 0.5);

    let louder = apply_gain(&tone220, 6.0)?;
    println!(
        "gain +6 dB: rms {:.4} -> {:.4} (normalized: {})",
        tone220.rms(),
        louder.waveform.rms(),
        louder.normalized
    );

    let faster = time_stretch(&tone220, 2.0)?;
    println!(
        "time stretch x2 speed: duration {:.3}s -> {:.3}s, f0 {:.1} -> {:.1} Hz",
        tone220.duration_seconds(),
        faster.duration_seconds(),
        f0_of(&tone220),
        f0_of(&faster)
    );

    let octave = pitch_shift(&tone220, 12.0)?;
    println!(
        "pitch shift +12 st: duration {:.3}s -> {:.3}s, f0 {:.1} -> {:.1} Hz",
        tone220.duration_seconds(),
        octave.duration_seconds(),
        f0_of(&tone220),
        f0_of(&octave)
    );

    let vibrato = tone::vibrato_tone(220.0, 2.0, 5.0, 2.0, CANONICAL_SAMPLE_RATE, 0.5);
    let widened = range_scale(&vibrato, 2.0)?;
    let deviation = |w: &Waveform| {
        let track = estimate_f0(w, &F0Config::default()).unwrap();
        let median = track.median_f0().unwrap();
        track
            .f0_hz
            .iter()
            .filter_map(|f| *f)
            .map(|hz| (hz / median).log2().abs() * 12.0)
            .fold(0.0f64, f64::max)
    };
    println!(
        "range scale x2: vibrato deviation {:.2} st -> {:.2} st (median f0 {:.1} -> {:.1} Hz)",
        deviation(&vibrato),
        deviation(&widened),
        f0_of(&vibrato),
        f0_of(&widened)
    );
    Ok(())
}
