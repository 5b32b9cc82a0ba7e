//! F0 tracking and terminal-contour labeling: the machinery that lets the
//! builder check an intonation clip really rises or falls, and that labels
//! natural clips for training-data generation.
//!
//!     cargo run --example f0_contours

use paradox::audio::{
    classify_terminal_contour, estimate_f0, reverse, tone, ContourConfig, F0Config,
    CANONICAL_SAMPLE_RATE,
};

fn main() -> paradox::Result<()> {
    let cfg = F0Config::default();
    let contour_cfg = ContourConfig::default();

    let cases = [
        ("steady 220 Hz tone", tone::sine(220.0, 1.0, CANONICAL_SAMPLE_RATE, 0.5)),
        ("rising chirp 180->260 Hz", tone::linear_chirp(180.0, 260.0, 1.0, CANONICAL_SAMPLE_RATE, 0.5)),
        ("falling chirp 260->180 Hz", tone::linear_chirp(260.0, 180.0, 1.0, CANONICAL_SAMPLE_RATE, 0.5)),
        ("silence", tone::silence(1.0, CANONICAL_SAMPLE_RATE)),
    ];

    for (name, w) in &cases {
        let track = estimate_f0(w, &cfg)?;
        let voiced = track.voiced_count();
        let label = if voiced >= 5 {
            classify_terminal_contour(&track, &contour_cfg)?.word().to_string()
        } else {
            "unvoiced".to_string()
        };
        println!(
            "{name}: {voiced}/{} voiced frames, median f0 {:?}, terminal contour: {label}",
            track.f0_hz.len(),
            track.median_f0().map(|f| f.round()),
        );
    }

    // time reversal flips the terminal contour
    let rising = tone::linear_chirp(180.0, 260.0, 1.0, CANONICAL_SAMPLE_RATE, 0.5);
    let track = estimate_f0(&reverse(&rising), &cfg)?;
    println!(
        "reversed rising chirp classifies: {}",
        classify_terminal_contour(&track, &contour_cfg)?.word()
    );
    Ok(())
}
