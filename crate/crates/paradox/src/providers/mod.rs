//! Provider-agnostic clients for script generation (LLM), speech synthesis
//! (TTS), transcription (ASR), and emotion classification, plus the SSML and
//! prompt-template machinery that drives them.
//!
//! Every adapter implements one of four small traits, so the whole pipeline
//! runs end-to-end against the deterministic in-process stubs with zero
//! network access. HTTP adapters live in [`http`].

pub mod http;
pub mod scripts;
pub mod ssml;
pub mod stub;
pub mod templates;

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::Result;

/// A synthesizable voice and what is known about its speaker.
/// `metadata` keys in use: `age_group` (young|old) and `gender` (male|female).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceSpec {
    pub provider_id: String,
    pub voice_id: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl VoiceSpec {
    pub fn new(provider_id: impl Into<String>, voice_id: impl Into<String>) -> Self {
        VoiceSpec {
            provider_id: provider_id.into(),
            voice_id: voice_id.into(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, key: &str, value: &str) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }
}

/// One synthesis request. `text` is plain text unless `is_ssml` is set, in
/// which case it is a full SSML document. `style` carries a delivery hint
/// (e.g. the emotion the voice should convey).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TtsJob {
    pub text: String,
    pub voice: VoiceSpec,
    #[serde(default)]
    pub is_ssml: bool,
    #[serde(default)]
    pub style: Option<String>,
}

impl TtsJob {
    pub fn plain(text: impl Into<String>, voice: VoiceSpec) -> Self {
        TtsJob { text: text.into(), voice, is_ssml: false, style: None }
    }

    pub fn ssml(document: impl Into<String>, voice: VoiceSpec) -> Self {
        TtsJob { text: document.into(), voice, is_ssml: true, style: None }
    }

    pub fn with_style(mut self, style: impl Into<String>) -> Self {
        self.style = Some(style.into());
        self
    }
}

/// ASR output: the hypothesis transcript, verbatim from the provider.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsrResult {
    pub hypothesis: String,
}

/// Emotion classifier output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmotionResult {
    pub top1_label: String,
    pub confidence: f64,
}

/// Text completion provider.
pub trait LlmClient: Send + Sync {
    /// Run one completion. `prompt` already contains the system preamble.
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Speech synthesis provider. Implementations must return canonical-format
/// audio (16 kHz mono); HTTP adapters resample on ingestion.
pub trait TtsClient: Send + Sync {
    fn synthesize(&self, job: &TtsJob) -> Result<Waveform>;
    fn provider_id(&self) -> &str;
}

/// Transcription provider.
pub trait AsrClient: Send + Sync {
    fn transcribe(&self, audio: &Waveform) -> Result<AsrResult>;
}

/// Emotion classification provider.
pub trait EmotionClient: Send + Sync {
    fn classify(&self, audio: &Waveform) -> Result<EmotionResult>;
}

/// Synthesize through any client; thin wrapper that keeps call sites uniform.
pub fn synthesize(job: &TtsJob, tts: &dyn TtsClient) -> Result<Waveform> {
    tts.synthesize(job)
}

pub fn transcribe(audio: &Waveform, asr: &dyn AsrClient) -> Result<AsrResult> {
    asr.transcribe(audio)
}

pub fn classify_emotion(audio: &Waveform, clf: &dyn EmotionClient) -> Result<EmotionResult> {
    clf.classify(audio)
}

/// Counting semaphore bounding in-flight requests per provider
/// (default 4). Shareable across worker threads.
pub struct RateLimiter {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl RateLimiter {
    pub fn new(max_concurrent: usize) -> Self {
        RateLimiter { permits: Mutex::new(max_concurrent.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> RatePermit<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        RatePermit { limiter: self }
    }
}

pub struct RatePermit<'a> {
    limiter: &'a RateLimiter,
}

impl Drop for RatePermit<'_> {
    fn drop(&mut self) {
        let mut p = self.limiter.permits.lock().unwrap();
        *p += 1;
        self.limiter.cv.notify_one();
    }
}
