//! Declarative build/verify configuration. One TOML file drives the whole
//! pipeline; a snapshot of the effective config is embedded in every emitted
//! manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::build::{ChoicePolicy, ComparisonMagnitudes};
use crate::bench::ManifestKind;
use crate::error::{Error, Result};
use crate::task::TaskKind;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub config_version: u32,
    /// Global seed; every randomized step derives from it.
    pub seed: u64,
    /// Items to build per task (benchmark scale is 200; desk scale 10).
    pub items_per_task: usize,
    /// Tasks to build; empty means all ten.
    pub tasks: Vec<String>,
    /// Run fully offline against the deterministic stub providers.
    pub stub: bool,
    /// "eval_benchmark" or "training". Preference-pair construction refuses
    /// eval_benchmark manifests.
    pub purpose: String,
    pub shuffle_choices: bool,
    /// Silence between assembled segments, seconds.
    pub gap_seconds: f64,
    /// Choice count for comparison items (2..=6).
    pub comparison_choices: usize,
    /// Whether comparison items carry a designated misleading pattern.
    pub comparison_adv: bool,
    pub magnitudes: MagnitudesConfig,
    /// Contrasting emotion pairs, (true-label candidate, adv-label candidate)
    /// orientations are drawn from each pair in both directions.
    pub emotion_pairs: Vec<[String; 2]>,
    /// Worker threads (0 = one per CPU).
    pub jobs: usize,
    pub gates: GatesConfig,
    /// Per-label synonym lists for the lexical gate.
    pub lexicon: BTreeMap<String, Vec<String>>,
    /// Optional replacement question-template file.
    pub question_templates: Option<PathBuf>,
    pub providers: ProvidersConfig,
    pub retry: RetryConfig,
    /// Max in-flight requests per provider.
    pub max_concurrent_requests: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MagnitudesConfig {
    /// Speed factors (low, high); output duration = input / rate.
    pub speed_rates: (f64, f64),
    pub gain_db: (f64, f64),
    pub pitch_semitones: (f64, f64),
    pub range_factors: (f64, f64),
}

impl Default for MagnitudesConfig {
    fn default() -> Self {
        let m = ComparisonMagnitudes::default();
        MagnitudesConfig {
            speed_rates: m.speed_rates,
            gain_db: m.gain_db,
            pitch_semitones: m.pitch_semitones,
            range_factors: m.range_factors,
        }
    }
}

impl MagnitudesConfig {
    pub fn to_magnitudes(&self) -> ComparisonMagnitudes {
        ComparisonMagnitudes {
            speed_rates: self.speed_rates,
            gain_db: self.gain_db,
            pitch_semitones: self.pitch_semitones,
            range_factors: self.range_factors,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GatesConfig {
    pub transcript: bool,
    pub lexical: bool,
    pub emotion_referee: bool,
    pub referee_min_confidence: f64,
}

impl Default for GatesConfig {
    fn default() -> Self {
        GatesConfig {
            transcript: true,
            lexical: true,
            emotion_referee: true,
            referee_min_confidence: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub tts: Option<EndpointConfig>,
    pub llm: Option<EndpointConfig>,
    pub asr: Option<EndpointConfig>,
    pub emotion: Option<EndpointConfig>,
    /// Voice catalog for real providers; ignored in stub mode (the stub
    /// ships its own bank).
    pub voices: Vec<VoiceEntry>,
}

/// One catalog voice with whatever speaker attributes the provider declares.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VoiceEntry {
    pub provider_id: String,
    pub voice_id: String,
    #[serde(default)]
    pub age_group: Option<String>,
    #[serde(default)]
    pub gender: Option<String>,
}

impl VoiceEntry {
    pub fn to_spec(&self) -> crate::providers::VoiceSpec {
        let mut spec = crate::providers::VoiceSpec::new(&self.provider_id, &self.voice_id);
        if let Some(age) = &self.age_group {
            spec = spec.with_attr("age_group", age);
        }
        if let Some(gender) = &self.gender {
            spec = spec.with_attr("gender", gender);
        }
        spec
    }
}

/// One HTTP provider. Credentials come from `PARADOX_<PROVIDER>_API_KEY`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub provider_id: String,
    pub url: String,
    pub model: String,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_scheme")]
    pub auth_scheme: String,
}

fn default_auth_header() -> String {
    "Authorization".into()
}

fn default_auth_scheme() -> String {
    "Bearer".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RetryConfig {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig { attempts: 3, base_delay_ms: 1000 }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            config_version: CONFIG_VERSION,
            seed: 42,
            items_per_task: 10,
            tasks: Vec::new(),
            stub: false,
            purpose: "eval_benchmark".into(),
            shuffle_choices: true,
            gap_seconds: 0.30,
            comparison_choices: 4,
            comparison_adv: true,
            magnitudes: MagnitudesConfig::default(),
            emotion_pairs: vec![
                ["happy".into(), "sad".into()],
                ["angry".into(), "neutral".into()],
            ],
            jobs: 0,
            gates: GatesConfig::default(),
            lexicon: BTreeMap::new(),
            question_templates: None,
            providers: ProvidersConfig::default(),
            retry: RetryConfig::default(),
            max_concurrent_requests: 4,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let config: PipelineConfig =
            toml::from_str(&raw).map_err(|e| Error::Format(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// A ready-to-run offline configuration.
    pub fn stub_default() -> Self {
        PipelineConfig { stub: true, ..PipelineConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "unsupported config version {}",
                self.config_version
            )));
        }
        if self.items_per_task == 0 {
            return Err(Error::invalid("items_per_task must be positive"));
        }
        for t in &self.tasks {
            TaskKind::parse(t)?;
        }
        self.manifest_kind()?;
        if !(2..=6).contains(&self.comparison_choices) {
            return Err(Error::invalid("comparison_choices must be in 2..=6"));
        }
        if self.gap_seconds < 0.0 || !self.gap_seconds.is_finite() {
            return Err(Error::invalid("gap_seconds must be non-negative"));
        }
        let m = &self.magnitudes;
        for (name, (lo, hi), range) in [
            ("speed_rates", m.speed_rates, 0.25..=4.0),
            ("range_factors", m.range_factors, 0.25..=4.0),
            ("pitch_semitones", m.pitch_semitones, -24.0..=24.0),
        ] {
            if !range.contains(&lo) || !range.contains(&hi) {
                return Err(Error::invalid(format!("{name} outside the valid range")));
            }
        }
        if self.emotion_pairs.is_empty() {
            return Err(Error::invalid("at least one emotion pair required"));
        }
        for pair in &self.emotion_pairs {
            if pair[0].eq_ignore_ascii_case(&pair[1]) {
                return Err(Error::invalid("emotion pair labels must differ"));
            }
        }
        if !self.stub {
            let missing: Vec<&str> = [
                ("tts", self.providers.tts.is_none()),
                ("llm", self.providers.llm.is_none()),
                ("asr", self.providers.asr.is_none()),
                ("emotion", self.providers.emotion.is_none()),
            ]
            .iter()
            .filter(|(_, none)| *none)
            .map(|(n, _)| *n)
            .collect();
            if !missing.is_empty() {
                return Err(Error::invalid(format!(
                    "non-stub mode requires provider endpoints: missing {missing:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn manifest_kind(&self) -> Result<ManifestKind> {
        match self.purpose.as_str() {
            "eval_benchmark" => Ok(ManifestKind::EvalBenchmark),
            "training" => Ok(ManifestKind::Training),
            other => Err(Error::invalid(format!(
                "purpose must be 'eval_benchmark' or 'training', got '{other}'"
            ))),
        }
    }

    pub fn task_list(&self) -> Result<Vec<TaskKind>> {
        if self.tasks.is_empty() {
            return Ok(TaskKind::ALL.to_vec());
        }
        self.tasks.iter().map(|t| TaskKind::parse(t)).collect()
    }

    pub fn choice_policy(&self) -> ChoicePolicy {
        ChoicePolicy {
            comparison_choices: self.comparison_choices,
            comparison_adv: self.comparison_adv,
            gap_seconds: self.gap_seconds,
        }
    }

    /// Snapshot embedded in manifests.
    pub fn snapshot(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_in_stub_mode() {
        let config = PipelineConfig::stub_default();
        config.validate().unwrap();
        assert_eq!(config.task_list().unwrap().len(), 10);
        assert_eq!(config.manifest_kind().unwrap(), ManifestKind::EvalBenchmark);
    }

    #[test]
    fn non_stub_mode_requires_endpoints() {
        let config = PipelineConfig::default();
        assert!(config.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let config = PipelineConfig::stub_default();
        let raw = toml::to_string(&config).unwrap();
        let back: PipelineConfig = toml::from_str(&raw).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut c = PipelineConfig::stub_default();
        c.items_per_task = 0;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::stub_default();
        c.tasks = vec!["tempo".into()];
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::stub_default();
        c.magnitudes.speed_rates = (0.1, 1.4);
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::stub_default();
        c.purpose = "benchmarkish".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_fail_loudly() {
        let err = toml::from_str::<PipelineConfig>("surprise = 1");
        assert!(err.is_err());
    }
}
