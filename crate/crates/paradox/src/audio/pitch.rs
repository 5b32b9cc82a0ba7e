//! F0 tracking (YIN-style cumulative mean normalized difference) and
//! terminal-contour labeling.

use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

/// F0 tracker settings. Defaults: 50-600 Hz search band, 10 ms hop,
/// aperiodicity threshold 0.15.
#[derive(Debug, Clone)]
pub struct F0Config {
    pub min_hz: f64,
    pub max_hz: f64,
    pub hop_seconds: f64,
    /// A frame is voiced when its best normalized difference is at or below
    /// this value (i.e. voicing confidence `1 - d'` is at least `1 - threshold`).
    pub threshold: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        F0Config { min_hz: 50.0, max_hz: 600.0, hop_seconds: 0.010, threshold: 0.15 }
    }
}

/// Frame-synchronous F0 estimates. `f0_hz[i]` is `None` for unvoiced frames;
/// `voicing_confidence[i]` is in [0, 1] either way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct F0Track {
    pub frame_hop_seconds: f64,
    pub f0_hz: Vec<Option<f64>>,
    pub voicing_confidence: Vec<f64>,
}

impl F0Track {
    pub fn voiced_frames(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.f0_hz.iter().enumerate().filter_map(|(i, f)| f.map(|hz| (i, hz)))
    }

    pub fn voiced_count(&self) -> usize {
        self.f0_hz.iter().filter(|f| f.is_some()).count()
    }

    /// Median F0 over voiced frames, if any.
    pub fn median_f0(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.f0_hz.iter().filter_map(|f| *f).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(v[v.len() / 2])
    }
}

/// Estimate the F0 track of a waveform. Requires at least 0.1 s of audio.
pub fn estimate_f0(w: &Waveform, cfg: &F0Config) -> Result<F0Track> {
    if w.duration_seconds() < 0.1 {
        return Err(Error::invalid("estimate_f0 requires at least 0.1 s of audio"));
    }
    if !(cfg.min_hz > 0.0 && cfg.max_hz > cfg.min_hz) {
        return Err(Error::invalid("f0 search band must satisfy 0 < min < max"));
    }
    let rate = f64::from(w.sample_rate_hz());
    let tau_max = (rate / cfg.min_hz).ceil() as usize;
    let tau_min = ((rate / cfg.max_hz).floor() as usize).max(2);
    let window = 2 * tau_max;
    let frame_len = window + tau_max;
    let hop = ((cfg.hop_seconds * rate).round() as usize).max(1);
    let samples = w.samples();

    let mut f0 = Vec::new();
    let mut conf = Vec::new();
    let mut diff = vec![0.0f64; tau_max + 1];

    // parabolic lag refinement can nudge an estimate just past the band
    // edge; reported voiced values stay inside the configured search band
    let clamp_band = |hz: f64| hz.clamp(cfg.min_hz, cfg.max_hz);
    let mut start = 0usize;
    while start + frame_len <= samples.len() {
        let frame = &samples[start..start + frame_len];
        let (hz, c) = yin_frame(frame, window, tau_min, tau_max, rate, cfg.threshold, &mut diff);
        f0.push(hz.map(clamp_band));
        conf.push(c);
        start += hop;
    }
    if f0.is_empty() {
        // Short but >= 0.1 s input at low sample rates: analyze one padded frame.
        let mut padded = samples.to_vec();
        padded.resize(frame_len, 0.0);
        let (hz, c) = yin_frame(&padded, window, tau_min, tau_max, rate, cfg.threshold, &mut diff);
        f0.push(hz.map(clamp_band));
        conf.push(c);
    }
    Ok(F0Track { frame_hop_seconds: hop as f64 / rate, f0_hz: f0, voicing_confidence: conf })
}

fn yin_frame(
    frame: &[f32],
    window: usize,
    tau_min: usize,
    tau_max: usize,
    rate: f64,
    threshold: f64,
    diff: &mut [f64],
) -> (Option<f64>, f64) {
    let energy: f64 = frame[..window].iter().map(|s| f64::from(*s) * f64::from(*s)).sum();
    if energy / (window as f64) < 1e-8 {
        return (None, 0.0);
    }

    // difference function
    diff[0] = 0.0;
    for tau in 1..=tau_max {
        let mut acc = 0.0f64;
        for i in 0..window {
            let d = f64::from(frame[i]) - f64::from(frame[i + tau]);
            acc += d * d;
        }
        diff[tau] = acc;
    }

    // cumulative mean normalized difference
    let mut cmnd = vec![1.0f64; tau_max + 1];
    let mut running = 0.0f64;
    for tau in 1..=tau_max {
        running += diff[tau];
        cmnd[tau] = if running > 0.0 { diff[tau] * tau as f64 / running } else { 1.0 };
    }

    // first dip below threshold, walked to its local minimum
    let mut best_tau = 0usize;
    let mut tau = tau_min;
    while tau <= tau_max {
        if cmnd[tau] < threshold {
            while tau < tau_max && cmnd[tau + 1] < cmnd[tau] {
                tau += 1;
            }
            best_tau = tau;
            break;
        }
        tau += 1;
    }

    if best_tau == 0 {
        // no dip below threshold: report the global minimum as confidence only
        let (gmin_tau, gmin) = (tau_min..=tau_max)
            .map(|t| (t, cmnd[t]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let _ = gmin_tau;
        return (None, (1.0 - gmin).clamp(0.0, 1.0));
    }

    // parabolic interpolation around the chosen lag
    let refined = if best_tau > tau_min && best_tau < tau_max {
        let (a, b, c) = (cmnd[best_tau - 1], cmnd[best_tau], cmnd[best_tau + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-12 {
            best_tau as f64 + 0.5 * (a - c) / denom
        } else {
            best_tau as f64
        }
    } else {
        best_tau as f64
    };

    let confidence = (1.0 - cmnd[best_tau]).clamp(0.0, 1.0);
    let hz = rate / refined;
    (Some(hz), confidence)
}

/// Terminal contour label for an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourLabel {
    Rising,
    Falling,
    Indeterminate,
}

impl ContourLabel {
    pub fn opposite(self) -> ContourLabel {
        match self {
            ContourLabel::Rising => ContourLabel::Falling,
            ContourLabel::Falling => ContourLabel::Rising,
            ContourLabel::Indeterminate => ContourLabel::Indeterminate,
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            ContourLabel::Rising => "rising",
            ContourLabel::Falling => "falling",
            ContourLabel::Indeterminate => "indeterminate",
        }
    }
}

/// Contour classifier settings: the fraction of voiced frames forming the
/// terminal window and the slope threshold in semitones/second.
#[derive(Debug, Clone)]
pub struct ContourConfig {
    pub terminal_fraction: f64,
    pub slope_threshold_st_per_s: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { terminal_fraction: 0.30, slope_threshold_st_per_s: 1.0 }
    }
}

/// Fit a robust (Theil-Sen) slope in semitone space over the final voiced
/// window and threshold it into Rising / Falling / Indeterminate.
pub fn classify_terminal_contour(track: &F0Track, cfg: &ContourConfig) -> Result<ContourLabel> {
    let voiced: Vec<(usize, f64)> = track.voiced_frames().collect();
    if voiced.len() < 5 {
        return Err(Error::invalid(format!(
            "terminal contour needs at least 5 voiced frames, got {}",
            voiced.len()
        )));
    }
    let window = ((voiced.len() as f64 * cfg.terminal_fraction).round() as usize).max(5);
    let tail = &voiced[voiced.len() - window.min(voiced.len())..];

    // (seconds, semitones relative to 55 Hz)
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .map(|(i, hz)| (*i as f64 * track.frame_hop_seconds, 12.0 * (hz / 55.0).log2()))
        .collect();

    let mut slopes = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let dt = pts[j].0 - pts[i].0;
            if dt > 0.0 {
                slopes.push((pts[j].1 - pts[i].1) / dt);
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::invalid("terminal window has no time extent"));
    }
    slopes.sort_by(f64::total_cmp);
    let slope = slopes[slopes.len() / 2];

    Ok(if slope >= cfg.slope_threshold_st_per_s {
        ContourLabel::Rising
    } else if slope <= -cfg.slope_threshold_st_per_s {
        ContourLabel::Falling
    } else {
        ContourLabel::Indeterminate
    })
}
