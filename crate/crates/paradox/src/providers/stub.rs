//! Deterministic offline providers. The stub synthesizer renders each voice
//! as a harmonic tone complex with a per-voice base F0 and mild vibrato, and
//! prepends an amplitude-coded data block carrying the transcript and style
//! label. The stub ASR and emotion classifier decode that block straight from
//! the samples, so the full pipeline (including a verify pass in a separate
//! process reading WAV files) runs with zero network access and no side
//! channel.
//!
//! The data block survives PCM16 write/read exactly: every coded sample is
//! `k / 32768` with small integer `k`, which quantizes back to `k`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::audio::{tone, wav, Waveform, CANONICAL_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::providers::ssml;
use crate::providers::{AsrClient, AsrResult, EmotionClient, EmotionResult, LlmClient, TtsClient, TtsJob, VoiceSpec};
use crate::seeded::{derive_seed, hash_str, rng_for};

pub const STUB_PROVIDER_ID: &str = "stub-tts";

// ---------------------------------------------------------------------------
// data block codec
// ---------------------------------------------------------------------------

/// Whether a decoded block was read in the waveform's forward or reversed
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Forward,
    Reversed,
}

/// Payload the synthesizer hides in each clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipTag {
    pub transcript: String,
    pub style: String,
}

const MAGIC: [i32; 16] =
    [77, -33, 55, -11, 99, -66, 22, -88, 44, -121, 8, -55, 110, -17, 66, -99];

fn byte_to_sample(b: u8) -> f32 {
    (i32::from(b) + 1) as f32 / 32768.0
}

fn sample_to_code(s: f32) -> i32 {
    (f64::from(s) * 32768.0).round() as i32
}

/// Encode a tag as a sample prefix. Layout: magic, transcript length (u16,
/// big-endian), transcript bytes, style length (u8), style bytes, then a
/// short silence pad.
pub fn encode_tag(tag: &ClipTag) -> Vec<f32> {
    let t = tag.transcript.as_bytes();
    let s = tag.style.as_bytes();
    assert!(t.len() <= u16::MAX as usize, "transcript too long to tag");
    assert!(s.len() <= u8::MAX as usize, "style too long to tag");
    let mut out = Vec::with_capacity(MAGIC.len() + 3 + t.len() + s.len() + 64);
    for k in MAGIC {
        out.push(k as f32 / 32768.0);
    }
    let len = t.len() as u16;
    out.push(byte_to_sample((len >> 8) as u8));
    out.push(byte_to_sample((len & 0xff) as u8));
    out.extend(t.iter().map(|b| byte_to_sample(*b)));
    out.push(byte_to_sample(s.len() as u8));
    out.extend(s.iter().map(|b| byte_to_sample(*b)));
    out.extend(std::iter::repeat_n(0.0, 64));
    out
}

fn decode_direction(samples: &mut dyn Iterator<Item = f32>) -> Option<ClipTag> {
    for k in MAGIC {
        if sample_to_code(samples.next()?) != k {
            return None;
        }
    }
    let next_byte = |it: &mut dyn Iterator<Item = f32>| -> Option<u8> {
        let code = sample_to_code(it.next()?);
        if (1..=256).contains(&code) {
            Some((code - 1) as u8)
        } else {
            None
        }
    };
    let hi = next_byte(samples)?;
    let lo = next_byte(samples)?;
    let tlen = usize::from(hi) << 8 | usize::from(lo);
    let mut t = Vec::with_capacity(tlen);
    for _ in 0..tlen {
        t.push(next_byte(samples)?);
    }
    let slen = usize::from(next_byte(samples)?);
    let mut s = Vec::with_capacity(slen);
    for _ in 0..slen {
        s.push(next_byte(samples)?);
    }
    Some(ClipTag {
        transcript: String::from_utf8(t).ok()?,
        style: String::from_utf8(s).ok()?,
    })
}

/// Decode the tag from either orientation of a clip.
pub fn decode_tag(w: &Waveform) -> Option<(ClipTag, Orientation)> {
    let mut fwd = w.samples().iter().copied();
    if let Some(tag) = decode_direction(&mut fwd) {
        return Some((tag, Orientation::Forward));
    }
    let mut rev = w.samples().iter().rev().copied();
    decode_direction(&mut rev).map(|tag| (tag, Orientation::Reversed))
}

// ---------------------------------------------------------------------------
// stub voices
// ---------------------------------------------------------------------------

/// The built-in stub voice bank: eight voices covering both age groups and
/// genders, each with a distinct base F0 derived from its id.
pub fn stub_voice_bank() -> Vec<VoiceSpec> {
    let mut voices = Vec::new();
    let attrs = [
        ("young", "male"),
        ("young", "female"),
        ("old", "male"),
        ("old", "female"),
    ];
    for round in 0..2 {
        for (i, (age, gender)) in attrs.iter().enumerate() {
            let id = format!("stub-v{:02}", round * attrs.len() + i + 1);
            voices.push(
                VoiceSpec::new(STUB_PROVIDER_ID, id)
                    .with_attr("age_group", age)
                    .with_attr("gender", gender),
            );
        }
    }
    voices
}

struct VoiceTimbre {
    base_f0: f64,
    vibrato_st: f64,
    vibrato_hz: f64,
    overtones: [f32; 2],
}

fn timbre_for(voice_id: &str) -> VoiceTimbre {
    let mut rng = rng_for(hash_str(voice_id), &["stub", "timbre"]);
    VoiceTimbre {
        base_f0: rng.gen_range(120.0..280.0),
        vibrato_st: rng.gen_range(0.7..1.2),
        vibrato_hz: rng.gen_range(4.5..6.5),
        overtones: [rng.gen_range(0.25..0.45), rng.gen_range(0.10..0.25)],
    }
}

/// Offline text-to-speech. Maps (voice, text) deterministically to a tagged
/// tone-complex clip; SSML prosody contours are honored so intonation items
/// carry a real rising/falling F0.
#[derive(Debug, Default, Clone)]
pub struct StubTts;

impl StubTts {
    fn duration_for(text: &str) -> f64 {
        (text.chars().count() as f64 * 0.055).clamp(1.2, 2.8)
    }

    fn render(&self, job: &TtsJob) -> Result<(String, Waveform)> {
        let timbre = timbre_for(&job.voice.voice_id);
        if job.is_ssml {
            let anchors = ssml::parse_contour_anchors(&job.text).ok_or_else(|| {
                Error::provider(STUB_PROVIDER_ID, "ssml input lacks a prosody contour")
            })?;
            let text = ssml::parse_inner_text(&job.text).ok_or_else(|| {
                Error::provider(STUB_PROVIDER_ID, "ssml input lacks prosody text")
            })?;
            let duration = Self::duration_for(&text);
            let base = timbre.base_f0;
            let curve = move |t: f64| {
                let x = (t / duration).clamp(0.0, 1.0);
                base * (1.0 + contour_offset(&anchors, x))
            };
            let voice = tone::harmonic_voice(
                curve,
                duration,
                CANONICAL_SAMPLE_RATE,
                0.25,
                &timbre.overtones,
            );
            Ok((text, voice))
        } else {
            let duration = Self::duration_for(&job.text);
            let phase = (hash_str(&job.text) % 628) as f64 / 100.0;
            let base = timbre.base_f0;
            let (dev, vhz) = (timbre.vibrato_st, timbre.vibrato_hz);
            let curve = move |t: f64| {
                base * ((dev * (std::f64::consts::TAU * vhz * t + phase).sin()) / 12.0).exp2()
            };
            let voice = tone::harmonic_voice(
                curve,
                duration,
                CANONICAL_SAMPLE_RATE,
                0.25,
                &timbre.overtones,
            );
            Ok((job.text.clone(), voice))
        }
    }
}

fn contour_offset(anchors: &[(f64, f64)], x: f64) -> f64 {
    match anchors.iter().position(|(p, _)| *p >= x) {
        Some(0) => anchors[0].1,
        Some(i) => {
            let (p0, v0) = anchors[i - 1];
            let (p1, v1) = anchors[i];
            let t = if p1 > p0 { (x - p0) / (p1 - p0) } else { 0.0 };
            v0 + (v1 - v0) * t
        }
        None => anchors.last().map(|(_, v)| *v).unwrap_or(0.0),
    }
}

impl TtsClient for StubTts {
    fn synthesize(&self, job: &TtsJob) -> Result<Waveform> {
        if job.text.trim().is_empty() {
            return Err(Error::provider(STUB_PROVIDER_ID, "empty synthesis text"));
        }
        let (transcript, voice) = self.render(job)?;
        let tag = ClipTag { transcript, style: job.style.clone().unwrap_or_default() };
        let mut samples = encode_tag(&tag);
        samples.extend_from_slice(voice.samples());
        // Pass through the canonical PCM16 quantizer so in-memory audio is
        // bit-identical to what a round trip through a WAV file yields.
        let w = Waveform::new(samples, CANONICAL_SAMPLE_RATE)?;
        wav::decode(&wav::encode(&w))
    }

    fn provider_id(&self) -> &str {
        STUB_PROVIDER_ID
    }
}

/// Offline ASR: reads the transcript tag out of the clip. Reversed or
/// untagged audio transcribes to an empty hypothesis, mirroring how a real
/// recognizer produces nothing usable on reversed speech.
#[derive(Debug, Default, Clone)]
pub struct StubAsr;

impl AsrClient for StubAsr {
    fn transcribe(&self, audio: &Waveform) -> Result<AsrResult> {
        let hypothesis = match decode_tag(audio) {
            Some((tag, Orientation::Forward)) => tag.transcript,
            _ => String::new(),
        };
        Ok(AsrResult { hypothesis })
    }
}

/// Offline emotion classifier: reads the style tag from either orientation
/// and reports it with full confidence. Counts how many times it was handed
/// forward-direction audio so tests can assert the referee only ever sees
/// reversed clips.
#[derive(Debug, Clone, Default)]
pub struct StubEmotion {
    forward_sightings: Arc<AtomicUsize>,
    fixed: Option<(String, f64)>,
}

impl StubEmotion {
    pub fn new() -> Self {
        Self::default()
    }

    /// A classifier that always answers `label` with `confidence`, for
    /// planting referee failures in tests.
    pub fn fixed(label: impl Into<String>, confidence: f64) -> Self {
        StubEmotion {
            forward_sightings: Arc::new(AtomicUsize::new(0)),
            fixed: Some((label.into(), confidence)),
        }
    }

    /// How many times classify() received forward-direction audio.
    pub fn forward_sightings(&self) -> usize {
        self.forward_sightings.load(Ordering::SeqCst)
    }
}

impl EmotionClient for StubEmotion {
    fn classify(&self, audio: &Waveform) -> Result<EmotionResult> {
        let decoded = decode_tag(audio);
        if matches!(decoded, Some((_, Orientation::Forward))) {
            self.forward_sightings.fetch_add(1, Ordering::SeqCst);
        }
        if let Some((label, confidence)) = &self.fixed {
            return Ok(EmotionResult { top1_label: label.clone(), confidence: *confidence });
        }
        match decoded {
            Some((tag, _)) if !tag.style.is_empty() => {
                Ok(EmotionResult { top1_label: tag.style, confidence: 1.0 })
            }
            _ => Ok(EmotionResult { top1_label: "unknown".into(), confidence: 0.0 }),
        }
    }
}

// ---------------------------------------------------------------------------
// stub LLM
// ---------------------------------------------------------------------------

/// Offline script generator. Parses the constraints back out of the prompt
/// (count, inclusion word, exclusion word, dialogue mode) and emits compliant
/// JSON. Output depends only on (seed, prompt), so retries and parallel
/// call orders cannot change a build.
#[derive(Debug, Clone)]
pub struct StubLlm {
    seed: u64,
}

impl StubLlm {
    pub fn new(seed: u64) -> Self {
        StubLlm { seed }
    }
}

fn quoted_after<'a>(prompt: &'a str, marker: &str) -> Option<&'a str> {
    let at = prompt.find(marker)? + marker.len();
    let rest = &prompt[at..];
    let end = rest.find('"')?;
    Some(&rest[..end])
}

fn first_uint(prompt: &str, marker: &str) -> Option<usize> {
    let at = prompt.find(marker)? + marker.len();
    let digits: String =
        prompt[at..].chars().skip_while(|c| !c.is_ascii_digit()).take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

impl LlmClient for StubLlm {
    fn complete(&self, prompt: &str) -> Result<String> {
        let h = derive_seed(self.seed, &["stub-llm", prompt]);
        let count = first_uint(prompt, "Generate ").unwrap_or(1).max(1);

        if prompt.contains("sets of TTS dialogue scripts") {
            return Ok(make_dialogues(h, count));
        }

        let include = quoted_after(prompt, "must include the word \"").ok_or_else(|| {
            Error::provider(STUB_PROVIDER_ID, "prompt lacks an inclusion clause")
        })?;
        let scripts = make_scripts(h, count, include, prompt);
        Ok(serde_json::to_string(&scripts).expect("string array serializes"))
    }
}

fn make_scripts(h: u64, count: usize, word: &str, prompt: &str) -> Vec<String> {
    // Phrase banks per task flavor. Filler vocabulary avoids every label word
    // (age/gender/emotion/level/contour/ordinal/count terms) so the lexical
    // exclusion check cannot trip on boilerplate.
    let bank: &[&str] = if prompt.contains("pitch") {
        &[
            "i am speaking with a {w} pitch as you can surely tell",
            "notice the {w} pitch in my voice as i talk",
            "my pitch stays {w} for this whole recording",
            "this voice of mine carries a {w} pitch",
        ]
    } else if prompt.contains("speaking in a") {
        &[
            "i am speaking in a {w} voice for this recording",
            "listen to this {w} voice of mine as i talk",
            "the {w} voice you hear belongs to me",
            "my voice stays {w} from start to finish",
        ]
    } else if prompt.contains("speed") {
        &[
            "i am speaking at a {w} speed as you can tell",
            "my speaking speed is {w} for this whole clip",
            "words leave my mouth at a {w} speed",
            "pay attention to the {w} speed of my speech",
        ]
    } else if prompt.contains("vocal range") {
        &[
            "i have a {w} vocal range and it shows",
            "my vocal range is {w} as anyone can hear",
            "a {w} vocal range is what this voice offers",
            "you are hearing a {w} vocal range right now",
        ]
    } else if prompt.contains("intonation") {
        &[
            "my intonation is {w} can you hear it",
            "notice how {w} my intonation sounds in this sentence",
            "i am speaking with a {w} intonation the whole time",
            "this sentence carries a {w} intonation from start to end",
        ]
    } else if prompt.contains("stating they are the") {
        &[
            "hi i am the {w} speaker",
            "hello everyone i am the {w} speaker here",
            "you are listening to the {w} speaker",
            "it is me the {w} speaker talking now",
        ]
    } else if prompt.contains("feeling") {
        &[
            "i am feeling truly {w} at the moment",
            "right now i feel completely {w} inside",
            "today i am {w} and it shows in everything",
            "i cannot hide how {w} i am feeling",
        ]
    } else {
        &[
            "i am a {w} person and everyone can tell",
            "you are listening to someone truly {w}",
            "make no mistake i am {w} through and through",
            "people always remark on how {w} i am",
        ]
    };

    (0..count)
        .map(|i| {
            let pick = ((h.rotate_left(i as u32 % 63)) as usize).wrapping_add(i) % bank.len();
            bank[pick].replace("{w}", word)
        })
        .collect()
}

fn make_dialogues(h: u64, count: usize) -> String {
    let mut rng = rng_for(h, &["dialogues"]);
    let turn_bank = [
        "i promise there is only {a} of us speaking here",
        "you are hearing exactly {a} speaker in this conversation",
        "count again because there are {a} voices here",
        "just {a} of us in this whole dialogue believe me",
        "everyone agrees there are {a} speakers talking",
    ];
    let mut sets = Vec::with_capacity(count);
    for _ in 0..count {
        let actual = rng.gen_range(1..=5usize);
        let adv = loop {
            let c = rng.gen_range(1..=20usize);
            if c != actual {
                break c;
            }
        };
        let adv_word = crate::text::number_word(adv).expect("counts <= 20 have words");
        let scripts: Vec<String> = (0..actual)
            .map(|t| {
                let template = turn_bank[(rng.gen_range(0..turn_bank.len()) + t) % turn_bank.len()];
                template.replace("{a}", adv_word)
            })
            .collect();
        sets.push(serde_json::json!({ "adv_label": adv, "scripts": scripts }));
    }
    serde_json::Value::Array(sets).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{
        classify_terminal_contour, estimate_f0, reverse, ContourConfig, ContourLabel, F0Config,
    };
    use crate::providers::templates::{fill_script_template, ScriptRequest};
    use crate::task::TaskKind;

    fn voice() -> VoiceSpec {
        stub_voice_bank().remove(0)
    }

    #[test]
    fn tag_codec_round_trips_through_pcm16_and_reversal() {
        let tag = ClipTag { transcript: "I am an old soul".into(), style: "sad".into() };
        let mut samples = encode_tag(&tag);
        samples.extend_from_slice(tone::sine(200.0, 0.5, CANONICAL_SAMPLE_RATE, 0.25).samples());
        let w = Waveform::new(samples, CANONICAL_SAMPLE_RATE).unwrap();
        let quantized = wav::decode(&wav::encode(&w)).unwrap();
        let (decoded, orient) = decode_tag(&quantized).unwrap();
        assert_eq!(decoded, tag);
        assert_eq!(orient, Orientation::Forward);

        let rev = reverse(&quantized);
        let (decoded, orient) = decode_tag(&rev).unwrap();
        assert_eq!(decoded, tag);
        assert_eq!(orient, Orientation::Reversed);
    }

    #[test]
    fn synthesis_is_deterministic_and_tagged() {
        let tts = StubTts;
        let job = TtsJob::plain("hello there from the stub", voice()).with_style("happy");
        let a = tts.synthesize(&job).unwrap();
        let b = tts.synthesize(&job).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert!(!a.is_empty());
        let (tag, _) = decode_tag(&a).unwrap();
        assert_eq!(tag.transcript, "hello there from the stub");
        assert_eq!(tag.style, "happy");
    }

    #[test]
    fn stub_asr_echoes_the_registered_transcript() {
        let tts = StubTts;
        let w = tts.synthesize(&TtsJob::plain("the quick brown fox", voice())).unwrap();
        let asr = StubAsr;
        assert_eq!(asr.transcribe(&w).unwrap().hypothesis, "the quick brown fox");
        assert_eq!(asr.transcribe(&reverse(&w)).unwrap().hypothesis, "");
    }

    #[test]
    fn stub_emotion_reads_reversed_clips_and_counts_forward_sightings() {
        let tts = StubTts;
        let clf = StubEmotion::new();
        let w = tts.synthesize(&TtsJob::plain("i feel wonderful", voice()).with_style("sad")).unwrap();
        let r = clf.classify(&reverse(&w)).unwrap();
        assert_eq!(r.top1_label, "sad");
        assert_eq!(r.confidence, 1.0);
        assert_eq!(clf.forward_sightings(), 0);
        let _ = clf.classify(&w).unwrap();
        assert_eq!(clf.forward_sightings(), 1);
    }

    #[test]
    fn ssml_synthesis_produces_the_requested_contour() {
        let tts = StubTts;
        let v = voice();
        for (contour, expected) in [
            (ContourLabel::Rising, ContourLabel::Rising),
            (ContourLabel::Falling, ContourLabel::Falling),
        ] {
            let doc =
                ssml::render_ssml("my intonation does its own thing", contour, &v).unwrap();
            let w = tts.synthesize(&TtsJob::ssml(doc, v.clone())).unwrap();
            let track = estimate_f0(&w, &F0Config::default()).unwrap();
            let label = classify_terminal_contour(&track, &ContourConfig::default()).unwrap();
            assert_eq!(label, expected);
        }
    }

    #[test]
    fn stub_llm_honors_the_prompt_constraints() {
        let llm = StubLlm::new(7);
        let req = ScriptRequest::new(TaskKind::Age, "old", "young", 6);
        let raw = llm.complete(&fill_script_template(&req).unwrap()).unwrap();
        let scripts: Vec<String> = serde_json::from_str(&raw).unwrap();
        assert_eq!(scripts.len(), 6);
        for s in &scripts {
            assert!(crate::text::contains_term(s, "old"), "missing inclusion in '{s}'");
            assert!(!crate::text::contains_term(s, "young"), "exclusion violated in '{s}'");
        }
        // deterministic per prompt
        assert_eq!(llm.complete(&fill_script_template(&req).unwrap()).unwrap(), raw);
    }

    #[test]
    fn stub_llm_dialogues_are_valid_sets() {
        let llm = StubLlm::new(11);
        let req = ScriptRequest::new(TaskKind::SpeakerCount, "1", "3", 5);
        let raw = llm.complete(&fill_script_template(&req).unwrap()).unwrap();
        let sets: Vec<serde_json::Value> = serde_json::from_str(&raw).unwrap();
        assert_eq!(sets.len(), 5);
        for set in sets {
            let adv = set["adv_label"].as_u64().unwrap() as usize;
            let scripts = set["scripts"].as_array().unwrap();
            assert!((1..=5).contains(&scripts.len()));
            assert_ne!(adv, scripts.len());
        }
    }

    #[test]
    fn voice_bank_covers_all_attribute_combinations() {
        let bank = stub_voice_bank();
        assert_eq!(bank.len(), 8);
        for age in ["young", "old"] {
            for gender in ["male", "female"] {
                assert!(
                    bank.iter().any(|v| v.attr("age_group") == Some(age)
                        && v.attr("gender") == Some(gender)),
                    "missing {age}/{gender}"
                );
            }
        }
    }
}
